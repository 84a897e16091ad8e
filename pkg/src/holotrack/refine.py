"""Radial intensity profiles and symmetry-based sub-pixel center refinement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .imops import sample_bilinear
from .track import Template

DELTA_R_DEFAULT = 0.5
DELTA_THETA_DEFAULT = 2 * np.pi / 64
SECTOR_HALF_WIDTH = np.pi / 6  # arc half-width around the two perpendiculars
XCORR_BAND = 5  # line thickness averaged for each axis
XCORR_MAX_ITER = 5
XCORR_TOL = 0.01  # px


@dataclass
class RadialProfile:
    """Mirrored angle-averaged intensity vs radius.

    values has even length M = 2K with values[i] == values[M-1-i]; the
    profile center sits between samples K-1 and K.
    """

    values: np.ndarray
    delta_r: float
    origin_center: tuple[float, float]
    mode: str  # "circular" | "sector"
    heading: Optional[float] = None

    @property
    def half_length(self) -> int:
        return len(self.values) // 2


class XcorrResult(NamedTuple):
    x: float
    y: float
    converged: bool


def _template_local(template: Template, center: tuple[float, float]) -> tuple[float, float]:
    ox = int(round(template.center[0])) - template.radius
    oy = int(round(template.center[1])) - template.radius
    return center[0] - ox, center[1] - oy


def radial_profile(
    template: Template,
    center: tuple[float, float],
    mode: str = "circular",
    delta_r: float = DELTA_R_DEFAULT,
    delta_theta: float = DELTA_THETA_DEFAULT,
    heading: Optional[float] = None,
) -> RadialProfile:
    """Resample a template on polar rays about `center` (frame coordinates).

    Circular mode averages bilinear samples over the full angle range at each
    radius; sector mode averages two opposed 60-degree arcs perpendicular to
    `heading`, which suppresses motion blur smeared along the direction of
    travel. The one-sided profile is mirrored into a symmetric signal.
    """
    if delta_r <= 0 or delta_r > 1:
        raise ValueError("delta_r must lie in (0, 1]")
    if delta_theta <= 0 or delta_theta > 2 * np.pi / 8:
        raise ValueError("delta_theta must lie in (0, pi/4]")
    img = template.pixels
    lx, ly = _template_local(template, center)
    h, w = img.shape
    if not (0 <= lx <= w - 1 and 0 <= ly <= h - 1):
        raise ValueError(f"center {center} outside template")

    inscribed = min(lx, ly, (w - 1) - lx, (h - 1) - ly)
    k = int(np.floor(inscribed / delta_r))
    if k < 1:
        raise ValueError("center too close to the template edge")

    if mode == "circular":
        n_angles = int(round(2 * np.pi / delta_theta))
        thetas = np.arange(n_angles) * delta_theta
    elif mode == "sector":
        if heading is None:
            raise ValueError("sector mode needs a heading")
        arc = np.arange(-SECTOR_HALF_WIDTH, SECTOR_HALF_WIDTH + 1e-12, delta_theta)
        thetas = np.concatenate([heading + np.pi / 2 + arc, heading - np.pi / 2 + arc])
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")

    radii = np.arange(k) * delta_r
    xs = lx + radii[:, None] * np.cos(thetas)[None, :]
    ys = ly + radii[:, None] * np.sin(thetas)[None, :]
    one_sided = sample_bilinear(img, xs, ys).mean(axis=1)

    values = np.concatenate([one_sided[::-1], one_sided])
    return RadialProfile(values, delta_r, (float(center[0]), float(center[1])), mode, heading)


def _band_line(img: np.ndarray, along_x: bool, at: float) -> np.ndarray:
    """Mean of a 5-px-thick band through `at`, as a 1D line along the axis."""
    n = img.shape[0] if along_x else img.shape[1]
    c = int(round(at))
    half = XCORR_BAND // 2
    lo = max(c - half, 0)
    hi = min(c + half + 1, n)
    return img[lo:hi, :].mean(axis=0) if along_x else img[:, lo:hi].mean(axis=1)


def _symmetric_center(line: np.ndarray) -> Optional[float]:
    """Locate the mirror-symmetry point of a line via self-reversed correlation."""
    sig = line - line.mean()
    if np.sqrt(np.mean(sig**2)) < 1e-12:
        return None
    corr = np.correlate(sig, sig[::-1], mode="full")
    peak = int(np.argmax(corr))
    # 3-point parabolic interpolation around the peak lag
    if 0 < peak < len(corr) - 1:
        c0, c1, c2 = corr[peak - 1], corr[peak], corr[peak + 1]
        denom = c0 - 2 * c1 + c2
        if denom < 0:
            peak = peak + 0.5 * (c0 - c2) / denom
    lag = peak - (len(line) - 1)
    return (lag + len(line) - 1) / 2.0


def xcorr_refine(template: Template, initial_center: tuple[float, float]) -> XcorrResult:
    """Refine a center estimate to the template's mirror-symmetry point.

    Alternates per-axis symmetric-correlation estimates until the update
    drops below 0.01 px or five iterations pass; a flat (zero-signal)
    template returns the initial center unchanged.
    """
    img = template.pixels
    lx, ly = _template_local(template, initial_center)
    side = img.shape[0]
    if abs(lx - (side - 1) / 2) > 0.25 * side or abs(ly - (side - 1) / 2) > 0.25 * side:
        raise ValueError("initial center too far from template center")

    converged = False
    for _ in range(XCORR_MAX_ITER):
        sx = _symmetric_center(_band_line(img, along_x=True, at=ly))
        sy = _symmetric_center(_band_line(img, along_x=False, at=lx))
        if sx is None or sy is None:
            return XcorrResult(initial_center[0], initial_center[1], True)
        step = float(np.hypot(sx - lx, sy - ly))
        lx, ly = sx, sy
        if step < XCORR_TOL:
            converged = True
            break

    ox = int(round(template.center[0])) - template.radius
    oy = int(round(template.center[1])) - template.radius
    return XcorrResult(lx + ox, ly + oy, converged)
