"""Trajectory post-processing: filtering, per-track statistics, and the
polynomial velocity-vs-height fit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class TrajectorySamples:
    """Raw per-track samples straight from the tracker output."""

    track_id: int
    frames: np.ndarray  # strictly increasing
    x_px: np.ndarray
    y_px: np.ndarray
    z_um: np.ndarray  # may contain NaN where reconstruction was skipped


@dataclass
class TrajectoryRecord:
    track_id: int
    n_samples: int
    mean_x: float
    mean_y: float
    mean_z: float
    z_std: float
    speed: float  # um/s, first-to-last displacement over elapsed time
    mean_step_speed: float  # um/s, averaged per-step speed


@dataclass
class FlowFilter:
    min_travel: float = 5.0  # px
    min_track_size: int = 5
    max_axial_std: float = 5.0  # um
    frame_rate: float = 200.0  # Hz
    z_range: tuple[float, float] = (0.0, 1e9)
    fit_range: tuple[float, float] = (0.0, 1e9)

    def validate(self) -> None:
        if min(self.min_travel, self.min_track_size, self.max_axial_std, self.frame_rate) <= 0:
            raise ValueError("flow filter thresholds must be positive")
        if self.z_range[0] >= self.z_range[1] or self.fit_range[0] >= self.fit_range[1]:
            raise ValueError("ranges must be ordered (low, high)")


@dataclass
class FlowProfileFit:
    order: int
    coefficients: np.ndarray  # ascending degree
    r_squared: float
    samples_used: int


def analyze_trajectories(
    tracks: Sequence[TrajectorySamples],
    filt: FlowFilter,
    conversion: float = 132.0,  # nm/px
) -> list[TrajectoryRecord]:
    """Summarize tracks and drop those failing the trajectory filters.

    Speed is the first-to-last lateral displacement (converted via nm/px)
    divided by the elapsed time at the given frame rate.
    """
    filt.validate()
    records = []
    for t in tracks:
        n = len(t.frames)
        if n < max(filt.min_track_size, 2):
            continue
        travel = float(np.hypot(t.x_px[-1] - t.x_px[0], t.y_px[-1] - t.y_px[0]))
        if travel < filt.min_travel:
            continue
        z = t.z_um[np.isfinite(t.z_um)]
        if len(z) == 0:
            continue
        z_std = float(np.std(z))
        if z_std > filt.max_axial_std:
            continue
        mean_z = float(np.mean(z))
        if not (filt.z_range[0] <= mean_z <= filt.z_range[1]):
            continue
        elapsed = (t.frames[-1] - t.frames[0]) / filt.frame_rate
        speed = travel * conversion * 1e-3 / elapsed  # nm -> um
        steps = np.hypot(np.diff(t.x_px), np.diff(t.y_px)) * conversion * 1e-3
        dt = np.diff(t.frames) / filt.frame_rate
        records.append(
            TrajectoryRecord(
                track_id=t.track_id,
                n_samples=n,
                mean_x=float(np.mean(t.x_px)),
                mean_y=float(np.mean(t.y_px)),
                mean_z=mean_z,
                z_std=z_std,
                speed=float(speed),
                mean_step_speed=float(np.mean(steps / dt)),
            )
        )
    return records


def fit_flow_profile(
    records: Sequence[TrajectoryRecord],
    order: int = 2,
    fit_range: Optional[tuple[float, float]] = None,
) -> FlowProfileFit:
    """Least-squares polynomial fit of speed vs mean height.

    Coefficients come back in ascending degree; R^2 is computed against the
    mean-speed baseline.
    """
    if fit_range is not None:
        records = [r for r in records if fit_range[0] <= r.mean_z <= fit_range[1]]
    if len(records) < order + 1:
        raise ValueError(
            f"underdetermined fit: {len(records)} records for order {order}"
        )
    z = np.array([r.mean_z for r in records])
    v = np.array([r.speed for r in records])
    coeffs = np.polynomial.polynomial.polyfit(z, v, order)
    predicted = np.polynomial.polynomial.polyval(z, coeffs)
    ss_res = float(np.sum((v - predicted) ** 2))
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    # essentially-constant data: any fit through the constant is perfect
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(v**2))):
        r_squared = 1.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return FlowProfileFit(order, coeffs, r_squared, len(records))


def bin_profile(
    records: Sequence[TrajectoryRecord], bin_width: float = 2.0
) -> list[tuple[float, float, int]]:
    """(z_bin_center, mean_speed, count) rows over fixed-width z bins."""
    if not records:
        return []
    z = np.array([r.mean_z for r in records])
    v = np.array([r.speed for r in records])
    idx = np.floor(z / bin_width).astype(int)
    rows = []
    for b in sorted(set(idx)):
        m = idx == b
        rows.append(((b + 0.5) * bin_width, float(v[m].mean()), int(m.sum())))
    return rows
