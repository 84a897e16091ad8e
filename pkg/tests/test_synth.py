import numpy as np
import pytest

from holotrack.detect import DetectParams, detect_particles
from holotrack.holo import OpticalConfig, ZScan, axial_scan, extend_profile
from holotrack.refine import radial_profile
from holotrack.synth import (
    ParticleSpec,
    SceneSpec,
    linear_motion,
    poiseuille_motion,
    poiseuille_speed,
    scatter_field,
    sinusoid_motion,
    synth_hologram,
    synth_motion_video,
)
from holotrack.track import Template


def _scene(optics, particles, n=256, **kw):
    return SceneSpec(particles, optics, (n, n), **kw)


class TestSynthHologram:
    def test_zero_particles_uniform(self, optics):
        frame = synth_hologram(_scene(optics, []))
        assert np.ptp(frame.intensities) == 0.0

    def test_fringes_detectable_at_truth(self, optics):
        n = 256
        fov = n * optics.pixel_size * 1e-3
        frame = synth_hologram(_scene(optics, [ParticleSpec(fov / 2, fov / 2, 15.0, 0.5)]))
        dets = detect_particles(frame, DetectParams())
        assert len(dets) == 1
        assert np.hypot(dets[0].x - n / 2, dets[0].y - n / 2) <= 1.0

    def test_forward_backward_round_trip(self, optics):
        n = 256
        fov = n * optics.pixel_size * 1e-3
        c = n // 2
        for z_true in (25.0, 60.0):
            frame = synth_hologram(_scene(optics, [ParticleSpec(fov / 2, fov / 2, z_true, 0.5)]))
            r = 100
            tpl = Template(
                frame.intensities[c - r : c + r + 1, c - r : c + r + 1].copy(),
                (float(c), float(c)), r, True,
            )
            prof = extend_profile(radial_profile(tpl, (float(c), float(c))), 2.0)
            rec = axial_scan(prof, ZScan(10.0, 0.5, 100.0), optics)
            assert abs(rec.z_star - z_true) <= 2 * 0.5

    def test_particle_outside_frame_rejected(self, optics):
        with pytest.raises(ValueError, match="outside"):
            synth_hologram(_scene(optics, [ParticleSpec(1e4, 1e4, 30.0)]))

    def test_noise_free_frame_radially_symmetric(self, optics):
        n = 256
        c_um = (n / 2) * optics.pixel_size * 1e-3
        frame = synth_hologram(_scene(optics, [ParticleSpec(c_um, c_um, 30.0, 0.5)]))
        img = frame.intensities
        c = n // 2
        for d in (3, 17, 40, 77):
            assert img[c, c + d] == pytest.approx(img[c, c - d], abs=1e-9)
            assert img[c + d, c] == pytest.approx(img[c - d, c], abs=1e-9)
            assert img[c + d, c] == pytest.approx(img[c, c + d], abs=1e-9)

    def test_field_superposition_is_linear(self, optics):
        n = 128
        p1 = (40.0, 40.0, 20.0, 4.0, 1.0)
        p2 = (90.0, 90.0, 35.0, 4.0, 1.0)
        u1 = scatter_field([p1], optics, n)
        u2 = scatter_field([p2], optics, n)
        u12 = scatter_field([p1, p2], optics, n)
        np.testing.assert_allclose(u12, u1 + u2 - 1.0, atol=1e-9)


class TestMotionVideo:
    def test_static_particles_identical_frames(self, optics):
        n = 128
        fov = n * optics.pixel_size * 1e-3
        spec = _scene(optics, [ParticleSpec(fov / 2, fov / 2, 20.0, 0.5)], n=n)
        spec.frames = 5
        frames, truth = synth_motion_video(spec)
        assert len(frames) == 5
        for f in frames[1:]:
            np.testing.assert_array_equal(f.intensities, frames[0].intensities)

    def test_sinusoid_truth_matches_formula(self, optics):
        n = 128
        fov = n * optics.pixel_size * 1e-3
        p = ParticleSpec(fov / 2, fov / 2, 20.0, 0.5)
        amp, period = 0.25, 40.0
        spec = _scene(optics, [p], n=n)
        spec.frames = 40
        spec.motions = [sinusoid_motion(p, amp, period)]
        _, truth = synth_motion_video(spec)
        px = optics.pixel_size
        for row in truth:
            expect = (p.x_um + amp * np.sin(2 * np.pi * row.frame / period)) * 1e3 / px
            assert row.x_px == pytest.approx(expect, abs=1e-12)

    def test_poiseuille_truth_speeds_exact(self, optics):
        n = 128
        fov = n * optics.pixel_size * 1e-3
        v_max, h = 1050.0, 100.0
        rate = 200.0
        rows = []
        for z in (5.0, 25.0, 50.0):
            p = ParticleSpec(2.0, fov / 2, z, 0.5)
            m = poiseuille_motion(p, v_max, h, rate)
            x0, x1 = m(0)[0], m(10)[0]
            speed = (x1 - x0) / (10 / rate)
            assert speed == pytest.approx(poiseuille_speed(z, v_max, h), rel=1e-12)
            rows.append(speed)
        assert rows[2] > rows[1] > rows[0]

    def test_linear_motion(self, optics):
        p = ParticleSpec(3.0, 4.0, 10.0)
        m = linear_motion(p, 0.5, -0.25)
        assert m(4) == pytest.approx((5.0, 3.0, 10.0))

    def test_deterministic_given_seed(self, optics):
        n = 128
        fov = n * optics.pixel_size * 1e-3
        p = ParticleSpec(fov / 2, fov / 2, 20.0, 0.5)

        def render():
            spec = _scene(optics, [p], n=n, noise_sigma=0.05, seed=123)
            spec.frames = 3
            return synth_motion_video(spec)

        fa, ta = render()
        fb, tb = render()
        assert ta == tb
        for a, b in zip(fa, fb):
            np.testing.assert_array_equal(a.intensities, b.intensities)

    def test_motion_count_must_match_particles(self, optics):
        spec = _scene(optics, [ParticleSpec(5.0, 5.0, 10.0)])
        spec.motions = []
        with pytest.raises(ValueError, match="one motion per particle"):
            synth_motion_video(spec)
