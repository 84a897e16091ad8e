import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holotrack.flow import (
    FlowFilter,
    TrajectoryRecord,
    TrajectorySamples,
    analyze_trajectories,
    bin_profile,
    fit_flow_profile,
)


def _track(tid, frames, x, y, z):
    return TrajectorySamples(
        tid, np.asarray(frames), np.asarray(x, dtype=float),
        np.asarray(y, dtype=float), np.asarray(z, dtype=float),
    )


def _record(z, v, tid=0):
    return TrajectoryRecord(tid, 10, 0.0, 0.0, z, 0.1, v, v)


def parabola(z, v_max=1050.0, h=100.0):
    return 4 * v_max * (z / h) * (1 - z / h)


class TestAnalyzeTrajectories:
    def test_speed_arithmetic(self):
        # 100 px over 50 frames at 200 Hz with 132 nm/px -> 52.8 um/s
        t = _track(0, np.arange(0, 51), np.linspace(0, 100, 51),
                   np.zeros(51), np.full(51, 20.0))
        filt = FlowFilter(min_travel=1.0, min_track_size=2, max_axial_std=5.0,
                          frame_rate=200.0)
        (rec,) = analyze_trajectories([t], filt, conversion=132.0)
        assert rec.speed == pytest.approx(52.8)

    def test_stationary_track_discarded(self):
        t = _track(0, np.arange(10), np.ones(10), np.ones(10), np.full(10, 20.0))
        filt = FlowFilter(min_travel=5.0, min_track_size=2, max_axial_std=5.0,
                          frame_rate=200.0)
        assert analyze_trajectories([t], filt) == []

    def test_axial_jumps_discarded(self):
        z = np.where(np.arange(20) % 2 == 0, 10.0, 50.0)
        t = _track(0, np.arange(20), np.linspace(0, 50, 20), np.zeros(20), z)
        filt = FlowFilter(min_travel=1.0, min_track_size=2, max_axial_std=5.0,
                          frame_rate=200.0)
        assert analyze_trajectories([t], filt) == []

    def test_short_track_discarded(self):
        t = _track(0, np.arange(3), np.linspace(0, 50, 3), np.zeros(3), np.full(3, 20.0))
        filt = FlowFilter(min_travel=1.0, min_track_size=5, max_axial_std=5.0,
                          frame_rate=200.0)
        assert analyze_trajectories([t], filt) == []

    def test_z_range_filter(self):
        t = _track(0, np.arange(10), np.linspace(0, 50, 10), np.zeros(10),
                   np.full(10, 80.0))
        filt = FlowFilter(min_travel=1.0, min_track_size=2, max_axial_std=5.0,
                          frame_rate=200.0, z_range=(0.0, 60.0))
        assert analyze_trajectories([t], filt) == []

    def test_nan_z_samples_ignored_in_statistics(self):
        z = np.full(10, 30.0)
        z[3] = np.nan
        t = _track(0, np.arange(10), np.linspace(0, 50, 10), np.zeros(10), z)
        filt = FlowFilter(min_travel=1.0, min_track_size=2, max_axial_std=5.0,
                          frame_rate=200.0)
        (rec,) = analyze_trajectories([t], filt)
        assert rec.mean_z == pytest.approx(30.0)

    def test_loosening_thresholds_never_removes_survivors(self):
        rng = np.random.default_rng(0)
        tracks = []
        for tid in range(30):
            n = rng.integers(3, 30)
            x = np.cumsum(rng.uniform(0, 3, n))
            z = rng.uniform(5, 70) + rng.normal(0, rng.uniform(0.1, 8), n)
            tracks.append(_track(tid, np.arange(n), x, np.zeros(n), z))
        tight = FlowFilter(min_travel=10.0, min_track_size=10, max_axial_std=2.0,
                           frame_rate=200.0, z_range=(10.0, 60.0))
        loose = FlowFilter(min_travel=2.0, min_track_size=3, max_axial_std=6.0,
                           frame_rate=200.0, z_range=(0.0, 80.0))
        kept_tight = {r.track_id for r in analyze_trajectories(tracks, tight)}
        kept_loose = {r.track_id for r in analyze_trajectories(tracks, loose)}
        assert kept_tight.issubset(kept_loose)


class TestFitFlowProfile:
    def test_exact_parabola_recovered(self):
        # v(z) = 4 v_max (z/h)(1 - z/h): coefficients (0, 4v/h, -4v/h^2)
        v_max, h = 1050.0, 100.0
        zs = np.linspace(5, 55, 50)
        records = [_record(z, parabola(z, v_max, h), i) for i, z in enumerate(zs)]
        fit = fit_flow_profile(records, order=2)
        assert fit.coefficients[0] == pytest.approx(0.0, abs=1e-8)
        assert fit.coefficients[1] == pytest.approx(4 * v_max / h, rel=1e-9)
        assert fit.coefficients[2] == pytest.approx(-4 * v_max / h**2, rel=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_noisy_parabola_monte_carlo(self, seed):
        v_max, h = 1050.0, 100.0
        rng = np.random.default_rng(seed)
        zs = rng.uniform(5, 55, 200)
        records = [
            _record(z, parabola(z, v_max, h) * (1 + rng.normal(0, 0.05)), i)
            for i, z in enumerate(zs)
        ]
        fit = fit_flow_profile(records, order=2)
        c = fit.coefficients
        vertex = -c[1] / (2 * c[2])
        v_est = c[0] + c[1] * vertex + c[2] * vertex**2
        assert fit.r_squared >= 0.9
        assert abs(v_est - v_max) / v_max <= 0.05

    def test_underdetermined_rejected(self):
        records = [_record(10.0, 100.0, 0), _record(20.0, 200.0, 1)]
        with pytest.raises(ValueError, match="underdetermined"):
            fit_flow_profile(records, order=2)

    def test_fit_range_restricts_samples(self):
        records = [_record(z, parabola(z), i) for i, z in enumerate((10, 20, 30, 70, 90))]
        fit = fit_flow_profile(records, order=2, fit_range=(0.0, 55.0))
        assert fit.samples_used == 3

    @settings(max_examples=40, deadline=None)
    @given(
        st.integers(0, 2),
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
        st.integers(0, 10_000),
    )
    def test_polynomial_samples_reproduced_to_machine_precision(self, order, coeffs, seed):
        rng = np.random.default_rng(seed)
        cs = np.array(coeffs[: order + 1])
        zs = rng.uniform(0, 100, 25)
        records = [
            _record(z, float(np.polynomial.polynomial.polyval(z, cs)), i)
            for i, z in enumerate(zs)
        ]
        fit = fit_flow_profile(records, order=order)
        predicted = np.polynomial.polynomial.polyval(zs, fit.coefficients)
        truth = np.polynomial.polynomial.polyval(zs, cs)
        np.testing.assert_allclose(predicted, truth, atol=1e-8 * max(1, np.abs(truth).max()))
        assert fit.r_squared >= 1.0 - 1e-12


class TestBinProfile:
    def test_bins_and_counts(self):
        records = [_record(z, v, i) for i, (z, v) in enumerate([(1.0, 10.0), (1.5, 20.0), (5.0, 30.0)])]
        rows = bin_profile(records, bin_width=2.0)
        assert rows[0] == (1.0, 15.0, 2)
        assert rows[1] == (5.0, 30.0, 1)

    def test_empty(self):
        assert bin_profile([], 2.0) == []
