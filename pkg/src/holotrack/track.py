"""Multi-particle tracking: constant-velocity Kalman filtering, gated Hungarian
assignment, and per-track template extraction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detect import Detection
from .frame_io import Frame

# state is (x, y, vx, vy); measurements observe (x, y)
F_TRANSITION = np.array(
    [[1.0, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]]
)
H_OBSERVE = np.array([[1.0, 0, 0, 0], [0, 1, 0, 0]])

_GATE_INF = 1e9


@dataclass
class TrackParams:
    cost_non_assignment: float = 80.0
    max_travel: float = 80.0
    max_tracks: int = 100
    template_radius: int = 200
    boundary_required: bool = False
    max_misses: int = 5
    # Kalman noise model, in px^2 (position) and (px/frame)^2 (velocity)
    process_noise_position: float = 1.0
    process_noise_velocity: float = 0.25
    measurement_noise: float = 1.0
    initial_position_variance: float = 100.0
    initial_velocity_variance: float = 25.0

    def validate(self) -> None:
        if not (10 <= self.template_radius <= 500):
            raise ValueError("template_radius must be in [10, 500]")
        positives = [
            self.cost_non_assignment,
            self.max_travel,
            self.max_tracks,
            self.max_misses,
            self.process_noise_position,
            self.process_noise_velocity,
            self.measurement_noise,
            self.initial_position_variance,
            self.initial_velocity_variance,
        ]
        if any(v <= 0 for v in positives):
            raise ValueError("all tracking parameters must be positive")

    def q_matrix(self) -> np.ndarray:
        return np.diag(
            [
                self.process_noise_position,
                self.process_noise_position,
                self.process_noise_velocity,
                self.process_noise_velocity,
            ]
        )

    def r_matrix(self) -> np.ndarray:
        return np.diag([self.measurement_noise, self.measurement_noise])

    def p0_matrix(self) -> np.ndarray:
        return np.diag(
            [
                self.initial_position_variance,
                self.initial_position_variance,
                self.initial_velocity_variance,
                self.initial_velocity_variance,
            ]
        )


@dataclass
class KalmanState:
    state: np.ndarray  # (4,)
    covariance: np.ndarray  # (4, 4)


@dataclass
class Template:
    pixels: np.ndarray  # (2R+1, 2R+1)
    center: tuple[float, float]  # sub-pixel, frame coordinates
    radius: int
    complete: bool


@dataclass
class Track:
    id: int
    kalman: KalmanState
    history: list[tuple[int, float, float]] = field(default_factory=list)
    template: Optional[Template] = None
    template_frame: Optional[int] = None
    misses: int = 0
    active: bool = True
    last_score: float = 0.0


def kalman_step(
    state: KalmanState,
    measurement: Optional[tuple[float, float]],
    params: TrackParams | None = None,
) -> KalmanState:
    """One predict (and, with a measurement, update) step of the position filter.

    Returns the posterior when a measurement is given, otherwise the prior.
    """
    if params is None:
        params = TrackParams()
    x = np.asarray(state.state, dtype=float)
    p = np.asarray(state.covariance, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(p))):
        raise ValueError("corrupt Kalman state: non-finite entries")

    x = F_TRANSITION @ x
    p = F_TRANSITION @ p @ F_TRANSITION.T + params.q_matrix()

    if measurement is not None:
        z = np.asarray(measurement, dtype=float)
        innov = z - H_OBSERVE @ x
        s = H_OBSERVE @ p @ H_OBSERVE.T + params.r_matrix()
        gain = p @ H_OBSERVE.T @ np.linalg.inv(s)
        x = x + gain @ innov
        p = (np.eye(4) - gain @ H_OBSERVE) @ p
    p = (p + p.T) / 2.0  # keep symmetric against accumulation error
    return KalmanState(x, p)


def hungarian_assign(
    cost: np.ndarray, cost_non_assignment: float
) -> list[tuple[int, int]]:
    """Minimum-cost partial matching with per-row/column non-assignment slots.

    A pairing costing more than `cost_non_assignment` is infeasible; every
    unmatched row or column contributes `cost_non_assignment` to the total.
    Returns (row, col) pairs of the optimal matching.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size and (np.any(~np.isfinite(cost)) or np.any(cost < 0)):
        raise ValueError("costs must be finite and non-negative")
    n, m = cost.shape if cost.ndim == 2 else (0, 0)
    if n == 0 or m == 0:
        return []
    gated = np.where(cost <= cost_non_assignment, cost, _GATE_INF)
    aug = np.full((n + m, m + n), _GATE_INF)
    aug[:n, :m] = gated
    aug[:n, m:] = np.where(np.eye(n, dtype=bool), cost_non_assignment, _GATE_INF)
    aug[n:, :m] = np.where(np.eye(m, dtype=bool), cost_non_assignment, _GATE_INF)
    aug[n:, m:] = 0.0
    rows, cols = linear_sum_assignment(aug)
    return [
        (int(r), int(c))
        for r, c in zip(rows, cols)
        if r < n and c < m and gated[r, c] < _GATE_INF
    ]


def extract_template(
    frame: Frame,
    center: tuple[float, float],
    radius: int,
    boundary_required: bool = False,
) -> Optional[Template]:
    """Copy the (2R+1)^2 square around round(center).

    Pixels outside the frame are filled with the frame median and the template
    is marked incomplete; with boundary_required an incomplete template is
    rejected (None).
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    img = frame.intensities
    h, w = img.shape
    cx, cy = int(round(center[0])), int(round(center[1]))
    x0, x1 = cx - radius, cx + radius + 1
    y0, y1 = cy - radius, cy + radius + 1
    complete = x0 >= 0 and y0 >= 0 and x1 <= w and y1 <= h
    if boundary_required and not complete:
        return None
    if complete:
        pixels = img[y0:y1, x0:x1].copy()
    else:
        pixels = np.full((2 * radius + 1, 2 * radius + 1), float(np.median(img)))
        sx0, sx1 = max(x0, 0), min(x1, w)
        sy0, sy1 = max(y0, 0), min(y1, h)
        if sx0 < sx1 and sy0 < sy1:
            pixels[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = img[sy0:sy1, sx0:sx1]
    return Template(pixels, (float(center[0]), float(center[1])), radius, complete)


class Tracker:
    """Owns track state; must be advanced strictly in frame order."""

    def __init__(self, params: TrackParams):
        params.validate()
        self.params = params
        self.tracks: list[Track] = []
        self._next_id = 0

    def spawn(self, det: Detection, frame_index: int) -> Track:
        p = self.params
        state = KalmanState(
            np.array([det.x, det.y, 0.0, 0.0]), p.p0_matrix()
        )
        track = Track(
            id=self._next_id,
            kalman=state,
            history=[(frame_index, det.x, det.y)],
            last_score=det.score,
        )
        self._next_id += 1
        self.tracks.append(track)
        return track


def advance_tracks(
    tracker: Tracker,
    detections: Sequence[Detection],
    frame: Frame,
    measured_positions: Optional[dict[int, tuple[float, float]]] = None,
) -> list[Track]:
    """Associate one frame's detections with existing tracks.

    Tracks predict forward; gated Euclidean costs feed the Hungarian matcher.
    Assigned tracks record the measured position (optionally refined via
    measured_positions keyed by detection index) and refresh their template;
    unmatched detections spawn tracks up to max_tracks; unmatched tracks
    accumulate misses and retire past max_misses.
    """
    p = tracker.params
    dets = sorted(enumerate(detections), key=lambda t: (-t[1].score, t[1].x, t[1].y))
    active = [t for t in tracker.tracks if t.active]
    predictions = [F_TRANSITION @ t.kalman.state for t in active]

    assigned_tracks: set[int] = set()
    assigned_dets: set[int] = set()
    if active and dets:
        cost = np.zeros((len(active), len(dets)))
        for i, pred in enumerate(predictions):
            for j, (_, d) in enumerate(dets):
                dist = float(np.hypot(pred[0] - d.x, pred[1] - d.y))
                cost[i, j] = dist if dist <= p.max_travel else 2.0 * p.cost_non_assignment
        for i, j in hungarian_assign(cost, p.cost_non_assignment):
            t = active[i]
            orig_idx, d = dets[j]
            pos = (d.x, d.y)
            if measured_positions and orig_idx in measured_positions:
                pos = measured_positions[orig_idx]
            t.kalman = kalman_step(t.kalman, pos, p)
            assigned_tracks.add(i)
            assigned_dets.add(j)
            t.misses = 0
            t.history.append((frame.index, pos[0], pos[1]))
            t.last_score = d.score
            t.template = extract_template(frame, pos, p.template_radius, p.boundary_required)
            t.template_frame = frame.index if t.template is not None else None

    for i, t in enumerate(active):
        if i not in assigned_tracks:
            t.kalman = kalman_step(t.kalman, None, p)
            t.misses += 1
            if t.misses > p.max_misses:
                t.active = False

    for j, (orig_idx, d) in enumerate(dets):
        if j in assigned_dets:
            continue
        if sum(1 for t in tracker.tracks if t.active) >= p.max_tracks:
            break
        pos = (d.x, d.y)
        if measured_positions and orig_idx in measured_positions:
            pos = measured_positions[orig_idx]
        det = Detection(pos[0], pos[1], d.score, d.frame_index)
        t = tracker.spawn(det, frame.index)
        t.template = extract_template(frame, pos, p.template_radius, p.boundary_required)
        t.template_frame = frame.index if t.template is not None else None

    return tracker.tracks
