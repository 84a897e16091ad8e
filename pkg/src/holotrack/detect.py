"""Circle-center detection for diffraction patterns.

Pipeline per pyramid level: Canny edges with an Otsu-derived threshold,
8-connected edge segment linking, then randomized isosceles-triangle voting.
Vote maps from all levels are fused at the original resolution and peaks
become detections.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import cv2
import numpy as np
from scipy import ndimage

from .frame_io import Frame
from .imops import gaussian_blur, resize_bilinear

OTSU_BINS = 256
CANNY_SIGMA = 1.0  # smoothing before gradients; fixed, the frame chain owns denoising


@dataclass
class DetectParams:
    num_scales: int = 3
    its_threshold: float = 0.03
    min_segment_length: int = 10
    min_votes: float = 30.0
    iterations_multiple: float = 5.0
    mapping_kernel_radius: int = 2
    canny_multiple: float = 1.0
    seed: int = 42

    def validate(self) -> None:
        checks = [
            (1 <= self.num_scales <= 4, "num_scales must be in [1, 4]"),
            (0.01 <= self.its_threshold <= 0.3, "its_threshold must be in [0.01, 0.3]"),
            (3 <= self.min_segment_length <= 100, "min_segment_length must be in [3, 100]"),
            (5 <= self.min_votes <= 50, "min_votes must be in [5, 50]"),
            (1 <= self.iterations_multiple <= 10, "iterations_multiple must be in [1, 10]"),
            (1 <= self.mapping_kernel_radius <= 10, "mapping_kernel_radius must be in [1, 10]"),
            (0 <= self.canny_multiple <= 10, "canny_multiple must be in [0, 10]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)


@dataclass
class EdgeMap:
    binary: np.ndarray  # bool, edge pixels
    grad_x: np.ndarray
    grad_y: np.ndarray


@dataclass
class Segment:
    points: np.ndarray  # (n, 2) int array of (x, y), 8-connected in sequence

    @property
    def length(self) -> int:
        return len(self.points)


@dataclass
class VoteMap:
    votes: np.ndarray


@dataclass
class Detection:
    x: float
    y: float
    score: float
    frame_index: int = 0


def _as_image(frame_or_image) -> np.ndarray:
    if isinstance(frame_or_image, Frame):
        return frame_or_image.intensities
    return np.asarray(frame_or_image, dtype=float)


def otsu_threshold(frame) -> float:
    """Histogram threshold (256 bins on [0, 1]) maximizing between-class variance.

    Ties break toward the lower boundary; a constant image returns 0.0.
    """
    img = _as_image(frame)
    bins = np.clip((img.ravel() * OTSU_BINS).astype(int), 0, OTSU_BINS - 1)
    hist = np.bincount(bins, minlength=OTSU_BINS)
    total = hist.sum()
    if total == 0:
        return 0.0
    centers = (np.arange(OTSU_BINS) + 0.5) / OTSU_BINS
    w0 = np.cumsum(hist)  # pixels strictly below boundary k are bins [0, k)
    mass = np.cumsum(hist * centers)
    best_k, best_var = 0, -1.0
    for k in range(OTSU_BINS):
        n0 = w0[k - 1] if k > 0 else 0
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            var = 0.0
        else:
            m0 = (mass[k - 1] if k > 0 else 0.0) / n0
            m1 = (mass[-1] - (mass[k - 1] if k > 0 else 0.0)) / n1
            var = (n0 / total) * (n1 / total) * (m0 - m1) ** 2
        if var > best_var + 1e-18:
            best_var = var
            best_k = k
    return best_k / OTSU_BINS


def canny_edges(
    frame,
    high: Optional[float] = None,
    low: Optional[float] = None,
    auto_multiple: float = 1.0,
) -> EdgeMap:
    """Canny edge extraction with retained Sobel gradients.

    Thresholds apply to the gradient magnitude normalized by its maximum.
    When `high` is omitted it defaults to auto_multiple times the Otsu
    threshold of the normalized magnitude distribution, which adapts to
    scenes mixing sharp and diffuse diffraction patterns; `low` defaults to
    high / 3.
    """
    img = _as_image(frame)
    h, w = img.shape
    smoothed = gaussian_blur(img.astype(np.float32), 5, CANNY_SIGMA)
    gx = cv2.Sobel(smoothed, cv2.CV_32F, 1, 0, ksize=3, borderType=cv2.BORDER_REFLECT)
    gy = cv2.Sobel(smoothed, cv2.CV_32F, 0, 1, ksize=3, borderType=cv2.BORDER_REFLECT)
    mag = cv2.magnitude(gx, gy)
    peak = mag.max()
    if peak <= 0:
        return EdgeMap(np.zeros(img.shape, dtype=bool), gx, gy)
    norm = mag / peak
    if high is None:
        high = auto_multiple * otsu_threshold(norm)
    if low is None:
        low = high / 3.0
    if high < low:
        raise ValueError(f"high threshold {high} below low {low}")

    # non-maximum suppression along the quantized gradient direction, only at
    # pixels that could survive hysteresis
    ys, xs = np.nonzero((norm >= low) & (norm > 0))
    thin = np.zeros((h, w), dtype=bool)
    if len(ys):
        angle = np.mod(np.arctan2(gy[ys, xs], gx[ys, xs]), np.pi)
        sector = np.floor((angle + np.pi / 8) / (np.pi / 4)).astype(int) % 4
        sector_off = np.array([(0, 1), (1, 1), (1, 0), (1, -1)])  # (dy, dx)
        padded = np.pad(norm, 1, mode="constant")
        dy = sector_off[sector, 0]
        dx = sector_off[sector, 1]
        vals = norm[ys, xs]
        fwd = padded[ys + 1 + dy, xs + 1 + dx]
        bwd = padded[ys + 1 - dy, xs + 1 - dx]
        keep = (vals >= fwd) & (vals > bwd)
        thin[ys[keep], xs[keep]] = True

    strong = thin & (norm >= high)
    weak = thin  # already gated at >= low
    edges = ndimage.binary_propagation(strong, structure=np.ones((3, 3), bool), mask=weak)
    return EdgeMap(edges, gx, gy)


# circular order of the 8 neighbors, 45 degrees apart
_NEIGHBOR_OFFSETS = np.array(
    [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
)


def _preference_table() -> np.ndarray:
    """Next-direction priority per previous direction: straightest turn first.

    Row 8 is the no-previous-direction case (plain circular order).
    """
    table = np.empty((9, 8), dtype=int)
    for prev in range(8):
        table[prev] = [(prev + t) % 8 for t in (0, 1, -1, 2, -2, 3, -3, 4)]
    table[8] = np.arange(8)
    return table


_PREFERENCE = _preference_table()


def link_segments(edges: EdgeMap, min_len: int) -> list[Segment]:
    """Trace 8-connected edge components into ordered point chains.

    Walks greedily from low-degree pixels (chain ends first), preferring the
    straightest continuation, so smooth curves come out as single chains and
    branches split off. Chains shorter than min_len are dropped; every edge
    pixel lands in at most one segment.
    """
    binary = edges.binary
    ys, xs = np.nonzero(binary)
    n = len(ys)
    if n == 0:
        return []
    h, w = binary.shape
    id_grid = np.full((h + 2, w + 2), -1, dtype=np.int64)
    id_grid[ys + 1, xs + 1] = np.arange(n)
    nbr = np.stack(
        [id_grid[ys + 1 + dy, xs + 1 + dx] for dy, dx in _NEIGHBOR_OFFSETS], axis=1
    )
    degree = (nbr >= 0).sum(axis=1)
    order = np.lexsort((xs, ys, degree))

    remaining = np.ones(n, dtype=bool)
    nbr_list = nbr.tolist()
    pref = _PREFERENCE.tolist()
    segments: list[Segment] = []
    for start in order:
        if not remaining[start]:
            continue
        remaining[start] = False
        chain = [int(start)]
        prev_dir = 8
        cur = int(start)
        while True:
            row = nbr_list[cur]
            nxt = -1
            for d in pref[prev_dir]:
                j = row[d]
                if j >= 0 and remaining[j]:
                    nxt = j
                    prev_dir = d
                    break
            if nxt < 0:
                break
            remaining[nxt] = False
            chain.append(nxt)
            cur = nxt
        if len(chain) >= min_len:
            idx = np.array(chain)
            segments.append(Segment(np.stack([xs[idx], ys[idx]], axis=1)))
    return segments


def _vote_kernel(radius: int) -> np.ndarray:
    side = 2 * radius + 1
    ax = np.arange(side) - radius
    k = np.exp(-0.5 * ((ax[:, None] ** 2 + ax[None, :] ** 2) / max(radius / 2.0, 1e-9) ** 2))
    return k / k.sum()


def its_transform(
    segments: Sequence[Segment],
    edges: EdgeMap,
    params: DetectParams,
    rng: Optional[np.random.Generator] = None,
) -> VoteMap:
    """Randomized isosceles-triangle voting over edge segments.

    Each draw takes two distinct points from one uniformly chosen segment and
    intersects their gradient lines; the intersection gets a vote when the
    triangle it forms with the pair is isosceles within `its_threshold`
    (relative leg-length difference). Accepted candidates deposit a
    unit-mass Gaussian kernel of radius `mapping_kernel_radius`.
    """
    h, w = edges.binary.shape
    votes = np.zeros((h, w), dtype=np.float32)
    segs = [s for s in segments if s.length >= 2]
    if not segs:
        return VoteMap(votes)
    if rng is None:
        rng = np.random.default_rng(params.seed)

    pts = np.concatenate([s.points for s in segs])
    lengths = np.array([s.length for s in segs])
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    total = int(lengths.sum())
    iters = int(round(params.iterations_multiple * total))
    if iters == 0:
        return VoteMap(votes)

    si = rng.integers(0, len(segs), size=iters)
    n = lengths[si]
    ia = rng.integers(0, n)
    ib = (ia + 1 + rng.integers(0, n - 1)) % n  # distinct from ia, uniform
    a = pts[starts[si] + ia].astype(float)
    b = pts[starts[si] + ib].astype(float)

    ga = np.stack([edges.grad_x[a[:, 1].astype(int), a[:, 0].astype(int)],
                   edges.grad_y[a[:, 1].astype(int), a[:, 0].astype(int)]], axis=1)
    gb = np.stack([edges.grad_x[b[:, 1].astype(int), b[:, 0].astype(int)],
                   edges.grad_y[b[:, 1].astype(int), b[:, 0].astype(int)]], axis=1)

    cross = ga[:, 0] * gb[:, 1] - ga[:, 1] * gb[:, 0]
    scale = np.hypot(ga[:, 0], ga[:, 1]) * np.hypot(gb[:, 0], gb[:, 1])
    ok = np.abs(cross) > 1e-12 * np.maximum(scale, 1e-300)

    d = b - a
    with np.errstate(divide="ignore", invalid="ignore"):
        ta = (d[:, 0] * gb[:, 1] - d[:, 1] * gb[:, 0]) / cross
        tb = (d[:, 0] * ga[:, 1] - d[:, 1] * ga[:, 0]) / cross
        cx = a[:, 0] + ta * ga[:, 0]
        cy = a[:, 1] + ta * ga[:, 1]
    # rays taken in either gradient orientation; only degenerate zero-length
    # parameters are rejected
    ok &= np.isfinite(cx) & np.isfinite(cy) & (ta != 0) & (tb != 0)

    la = np.hypot(cx - a[:, 0], cy - a[:, 1])
    lb = np.hypot(cx - b[:, 0], cy - b[:, 1])
    longer = np.maximum(la, lb)
    ok &= longer > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        iso = np.abs(la - lb) / longer
    ok &= iso <= params.its_threshold

    px = np.round(cx[ok]).astype(int)
    py = np.round(cy[ok]).astype(int)
    inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
    px, py = px[inside], py[inside]
    if len(px) == 0:
        return VoteMap(votes)

    r = params.mapping_kernel_radius
    kern = _vote_kernel(r).ravel().astype(np.float32)
    off = np.arange(-r, r + 1)
    oy, ox = np.meshgrid(off, off, indexing="ij")
    rows = py[:, None] + oy.ravel()[None, :]
    cols = px[:, None] + ox.ravel()[None, :]
    weights = np.broadcast_to(kern, rows.shape)
    m = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    np.add.at(votes, (rows[m], cols[m]), weights[m])
    return VoteMap(votes)


def _local_maxima(fused: np.ndarray, min_votes: float) -> tuple[np.ndarray, np.ndarray]:
    """8-neighborhood maxima with value >= min_votes, evaluated sparsely."""
    h, w = fused.shape
    ys, xs = np.nonzero(fused >= max(min_votes, np.finfo(float).tiny))
    if len(ys) == 0:
        return ys, xs
    padded = np.pad(fused, 1, mode="constant")
    vals = fused[ys, xs]
    keep = np.ones(len(ys), dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            keep &= vals >= padded[ys + 1 + dy, xs + 1 + dx]
    return ys[keep], xs[keep]


def detect_particles(frame: Frame, params: DetectParams) -> list[Detection]:
    """Multi-scale ITs detection on a preprocessed frame.

    Vote maps from each pyramid level are upsampled to the original size and
    summed; 8-neighborhood maxima of the fused raw map at or above min_votes
    become detections, refined by a 3x3 vote centroid and de-duplicated
    within the vote-kernel radius.
    """
    params.validate()
    img = _as_image(frame)
    h0, w0 = img.shape

    levels = [img]
    for _ in range(1, params.num_scales):
        nh, nw = levels[-1].shape[0] // 2, levels[-1].shape[1] // 2
        if nh < 8 or nw < 8:
            break
        levels.append(resize_bilinear(levels[-1], (nh, nw)))

    frame_index = frame.index if isinstance(frame, Frame) else 0

    def vote_level(k: int) -> Optional[np.ndarray]:
        edges = canny_edges(levels[k], auto_multiple=params.canny_multiple)
        if not edges.binary.any():
            return None
        segs = link_segments(edges, params.min_segment_length)
        rng = np.random.default_rng([params.seed, frame_index, k])
        votes = its_transform(segs, edges, params, rng).votes
        if k > 0 and votes.any():
            votes = resize_bilinear(votes, (h0, w0))
        return votes

    # per-scale streams are independent; summation order is fixed by level
    if len(levels) > 1:
        with ThreadPoolExecutor(max_workers=len(levels)) as pool:
            maps = list(pool.map(vote_level, range(len(levels))))
    else:
        maps = [vote_level(0)]
    fused = np.zeros((h0, w0), dtype=np.float32)
    for votes in maps:
        if votes is not None and votes.shape == fused.shape:
            fused += votes

    ys, xs = _local_maxima(fused, params.min_votes)
    if len(ys) == 0:
        return []

    detections = []
    index = frame.index if isinstance(frame, Frame) else 0
    for y, x in zip(ys, xs):
        y0, y1 = max(y - 1, 0), min(y + 2, h0)
        x0, x1 = max(x - 1, 0), min(x + 2, w0)
        win = fused[y0:y1, x0:x1].astype(float)
        wsum = win.sum()
        gy, gx = np.mgrid[y0:y1, x0:x1]
        detections.append(
            Detection(
                x=float((win * gx).sum() / wsum),
                y=float((win * gy).sum() / wsum),
                score=float(fused[y, x]),
                frame_index=index,
            )
        )

    # suppress duplicates closer than the vote-kernel radius, best first
    detections.sort(key=lambda d: (-d.score, d.y, d.x))
    kept: list[Detection] = []
    for det in detections:
        if all(np.hypot(det.x - k.x, det.y - k.y) >= params.mapping_kernel_radius for k in kept):
            kept.append(det)
    return kept
