import numpy as np
import pytest
from scipy import ndimage

from holotrack.frame_io import Frame
from holotrack.refine import RadialProfile, radial_profile, xcorr_refine
from holotrack.track import Template, extract_template

from conftest import ring_image


def gaussian_spot(n, cx, cy, sigma):
    ax = np.arange(n)
    rr2 = (ax[None, :] - cx) ** 2 + (ax[:, None] - cy) ** 2
    return np.exp(-0.5 * rr2 / sigma**2)


def centered_template(img):
    n = img.shape[0]
    c = (n - 1) / 2.0
    return Template(img, (c, c), n // 2, True), (c, c)


class TestRadialProfile:
    def test_constant_template_constant_profile(self):
        tpl, c = centered_template(np.full((81, 81), 0.42))
        prof = radial_profile(tpl, c)
        np.testing.assert_allclose(prof.values, 0.42, atol=1e-12)

    def test_gaussian_spot_matches_analytic(self):
        # oracle: the analytic radial law of the rendered spot
        sigma = 10.0
        tpl, c = centered_template(gaussian_spot(121, 60.0, 60.0, sigma))
        prof = radial_profile(tpl, c, delta_r=0.5)
        k = prof.half_length
        radii = np.arange(k) * prof.delta_r
        got = prof.values[k:]
        expected = np.exp(-0.5 * (radii / sigma) ** 2)
        sel = radii <= 3 * sigma
        np.testing.assert_allclose(got[sel], expected[sel], rtol=0.01)

    def test_mirror_symmetry_exact(self):
        rng = np.random.default_rng(0)
        tpl, c = centered_template(rng.random((61, 61)))
        prof = radial_profile(tpl, c)
        np.testing.assert_array_equal(prof.values, prof.values[::-1])
        assert len(prof.values) % 2 == 0

    def test_rotation_invariance_circular(self):
        tpl, c = centered_template(ring_image(81, 40, 40, 25))
        prof = radial_profile(tpl, c)
        rot, _ = centered_template(np.rot90(tpl.pixels).copy())
        prof_rot = radial_profile(rot, c)
        np.testing.assert_allclose(prof.values, prof_rot.values, atol=1e-6)

    def test_sector_mode_rejects_motion_blur(self):
        # blur along x scales the y-axis cut by a constant; compare shapes
        sigma, blur = 10.0, 6.0
        clean = gaussian_spot(121, 60.0, 60.0, sigma)
        blurred = ndimage.gaussian_filter1d(clean, blur, axis=1)
        tpl, c = centered_template(blurred)
        k = None

        def shape(profile):
            half = profile.values[profile.half_length :]
            return half / half.max()

        reference = shape(radial_profile(*centered_template(clean)))
        sector = shape(radial_profile(tpl, c, mode="sector", heading=0.0))
        circular = shape(radial_profile(tpl, c, mode="circular"))
        n = min(len(reference), len(sector))
        sel = np.arange(n) * 0.5 <= 2.5 * sigma
        err_sector = np.max(np.abs(sector[:n][sel] - reference[:n][sel]))
        err_circ = np.max(np.abs(circular[:n][sel] - reference[:n][sel]))
        assert err_sector <= 0.02
        assert err_circ > 0.02

    def test_sector_requires_heading(self):
        tpl, c = centered_template(np.zeros((41, 41)))
        with pytest.raises(ValueError, match="heading"):
            radial_profile(tpl, c, mode="sector")

    def test_center_outside_template_rejected(self):
        tpl, _ = centered_template(np.zeros((41, 41)))
        with pytest.raises(ValueError):
            radial_profile(tpl, (500.0, 500.0))

    def test_angle_averaging_reduces_noise_variance(self):
        # statistical: variance at a fixed radius across seeds drops by >= n/2
        n_angles = 64
        sigma_n = 0.1
        vals = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            img = 0.5 + rng.normal(0, sigma_n, (81, 81))
            tpl, c = centered_template(img)
            prof = radial_profile(tpl, c, delta_theta=2 * np.pi / n_angles)
            vals.append(prof.values[prof.half_length + 50])  # r = 25 px
        reduction = sigma_n**2 / np.var(vals)
        assert reduction >= n_angles / 2


class TestXcorrRefine:
    def test_recovers_subpixel_center(self):
        truth = (64.3, 63.8)
        img = ring_image(128, truth[0], truth[1], 20, width=2.5)
        img += ring_image(128, truth[0], truth[1], 32, width=3.0) * 0.5
        guess = (truth[0] + 2.3, truth[1] - 1.7)
        tpl = extract_template(Frame(img), guess, 40)
        res = xcorr_refine(tpl, guess)
        assert np.hypot(res.x - truth[0], res.y - truth[1]) <= 0.1

    def test_constant_template_returns_initial(self):
        tpl = extract_template(Frame(np.full((128, 128), 0.5)), (64.0, 64.0), 30)
        res = xcorr_refine(tpl, (64.0, 64.0))
        assert (res.x, res.y) == (64.0, 64.0)

    def test_integer_center_exact_guess_is_fixed_point(self):
        img = ring_image(129, 64.0, 64.0, 20, width=2.5)
        tpl = extract_template(Frame(img), (64.0, 64.0), 40)
        res = xcorr_refine(tpl, (64.0, 64.0))
        assert abs(res.x - 64.0) < 1e-6
        assert abs(res.y - 64.0) < 1e-6

    def test_idempotent_at_convergence(self):
        truth = (64.37, 64.61)
        img = ring_image(128, truth[0], truth[1], 18, width=2.0)
        tpl = extract_template(Frame(img), (64.0, 64.0), 40)
        first = xcorr_refine(tpl, (64.0, 64.0))
        second = xcorr_refine(tpl, (first.x, first.y))
        assert np.hypot(second.x - first.x, second.y - first.y) <= 0.02

    def test_far_initial_guess_rejected(self):
        tpl = extract_template(Frame(np.zeros((128, 128))), (64.0, 64.0), 20)
        with pytest.raises(ValueError):
            xcorr_refine(tpl, (64.0 + 15.0, 64.0))
