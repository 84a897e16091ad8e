import numpy as np
import pytest

from holotrack.detect import EdgeMap, Segment
from holotrack.holo import OpticalConfig


@pytest.fixture
def optics():
    return OpticalConfig(wavelength_vacuum=470.0, refractive_index=1.33, pixel_size=132.0)


def ring_image(n, cx, cy, radius, width=3.0, amplitude=0.8):
    """Bright ring with a smooth (Gaussian) cross-section on a dark background."""
    ax = np.arange(n)
    rr = np.hypot(ax[None, :] - cx, ax[:, None] - cy)
    return amplitude * np.exp(-0.5 * ((rr - radius) / width) ** 2)


def midpoint_circle(cx, cy, radius):
    """1-px-wide 8-connected circle rasterization (midpoint algorithm)."""
    pts = set()
    x, y = int(radius), 0
    err = 1 - x
    while x >= y:
        for px, py in [(x, y), (y, x), (-y, x), (-x, y), (-x, -y), (-y, -x), (y, -x), (x, -y)]:
            pts.add((int(cx) + px, int(cy) + py))
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    return pts


def circle_segment_edges(n, cx, cy, radius, n_points=None):
    """Exact circle edge points with exact radial gradients, as Segment + EdgeMap.

    The analytic construction bypasses Canny entirely, isolating the voting
    transform. Points are ordered by angle so the segment is a chain.
    """
    pts = np.array(sorted(midpoint_circle(cx, cy, radius),
                          key=lambda p: np.arctan2(p[1] - cy, p[0] - cx)))
    binary = np.zeros((n, n), dtype=bool)
    binary[pts[:, 1], pts[:, 0]] = True
    grad_x = np.zeros((n, n))
    grad_y = np.zeros((n, n))
    gx = pts[:, 0] - cx
    gy = pts[:, 1] - cy
    norm = np.hypot(gx, gy)
    grad_x[pts[:, 1], pts[:, 0]] = gx / norm
    grad_y[pts[:, 1], pts[:, 0]] = gy / norm
    return [Segment(pts)], EdgeMap(binary, grad_x, grad_y)
