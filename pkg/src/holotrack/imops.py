"""Shared grid numerics: bilinear sampling/resizing and separable Gaussian blur."""

from __future__ import annotations

import cv2
import numpy as np


def sample_bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample img at fractional (x, y) positions, clamping to the border.

    x runs along columns, y along rows. Output has the broadcast shape of x/y.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, img.shape[1] - 1.0)
    y = np.clip(np.asarray(y, dtype=float), 0.0, img.shape[0] - 1.0)
    x0 = np.clip(np.floor(x).astype(int), 0, img.shape[1] - 2) if img.shape[1] > 1 else np.zeros_like(x, dtype=int)
    y0 = np.clip(np.floor(y).astype(int), 0, img.shape[0] - 2) if img.shape[0] > 1 else np.zeros_like(y, dtype=int)
    fx = x - x0
    fy = y - y0
    x1 = np.minimum(x0 + 1, img.shape[1] - 1)
    y1 = np.minimum(y0 + 1, img.shape[0] - 1)
    top = (1.0 - fx) * img[y0, x0] + fx * img[y0, x1]
    bot = (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
    return (1.0 - fy) * top + fy * bot


def _lerp_indices(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pos = np.clip((np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5, 0.0, n_in - 1.0)
    lo = np.clip(np.floor(pos).astype(int), 0, max(n_in - 2, 0))
    return lo, np.minimum(lo + 1, n_in - 1), pos - lo


def resize_bilinear(img: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Resize with bilinear interpolation, pixel-center aligned.

    Output pixel (i, j) samples the input at ((i + 0.5) * sy - 0.5,
    (j + 0.5) * sx - 0.5); the convention round-trips positions under
    downsample-then-upsample. Interpolation is separable (rows, then columns).
    """
    out_h, out_w = out_shape
    if out_h < 1 or out_w < 1:
        raise ValueError(f"cannot resize to {out_shape}")
    in_h, in_w = img.shape
    if in_h == 2 * out_h and in_w == 2 * out_w:
        # exact 2x block mean equals half-pixel bilinear at this ratio
        return 0.25 * (
            img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2]
        )
    y0, y1, wy = _lerp_indices(in_h, out_h)
    x0, x1, wx = _lerp_indices(in_w, out_w)
    if img.dtype == np.float32:
        wy = wy.astype(np.float32)
        wx = wx.astype(np.float32)
    rows = img[y0] * (1.0 - wy)[:, None] + img[y1] * wy[:, None]
    return rows[:, x0] * (1.0 - wx) + rows[:, x1] * wx


def gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    """Sampled, normalized 1D Gaussian; size must be odd."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and positive, got {size}")
    half = size // 2
    x = np.arange(-half, half + 1, dtype=float)
    k = np.exp(-0.5 * (x / max(sigma, 1e-12)) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, size: int, sigma: float) -> np.ndarray:
    """Separable convolution with a sampled Gaussian kernel (reflect boundary)."""
    k = gaussian_kernel1d(size, sigma)
    return cv2.sepFilter2D(img, -1, k, k, borderType=cv2.BORDER_REFLECT)
