"""Image-sequence ingestion, background modelling, and frame pre-processing."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from PIL import Image

from .imops import gaussian_blur, resize_bilinear

EPS_DIV = 1e-6  # guard against division by zero-valued background pixels

_IMAGE_SUFFIXES = {".pgm", ".png", ".tif", ".tiff", ".bmp", ".pbm", ".ppm"}

# ITU-R 601 luminance weights for color input
_LUMA = np.array([0.299, 0.587, 0.114])


class DataError(Exception):
    """Raised for malformed or missing input data (exit code 2 at the CLI)."""


@dataclass
class Frame:
    """One video frame: a row-major grid of intensities plus metadata.

    intensities has shape (height, width). pixel_size is the lateral
    conversion factor in nm/pixel.
    """

    intensities: np.ndarray
    index: int = 0
    pixel_size: float = 132.0

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    @property
    def height(self) -> int:
        return self.intensities.shape[0]


@dataclass
class PreprocessConfig:
    roi: Optional[tuple[int, int, int, int]] = None  # (x0, y0, w, h)
    boundary_margin: int = 0
    resize_factor: float = 1.0
    gaussian_kernel: int = 0  # odd pixel count, 0 disables
    normalize: bool = True
    background_mode: Optional[str] = None  # None | "static" | "moving_average"
    background_window: int = 10

    def validate(self) -> None:
        if self.resize_factor <= 0:
            raise ValueError("resize_factor must be positive")
        if self.gaussian_kernel != 0 and (self.gaussian_kernel < 0 or self.gaussian_kernel % 2 == 0):
            raise ValueError("gaussian_kernel must be 0 or a positive odd integer")
        if self.background_mode not in (None, "static", "moving_average"):
            raise ValueError(f"unknown background_mode {self.background_mode!r}")
        if self.background_window < 1:
            raise ValueError("background_window must be >= 1")
        if self.boundary_margin < 0:
            raise ValueError("boundary_margin must be >= 0")


class BackgroundModel:
    """Per-pixel mean of a window of frames, static or continuously updated.

    The moving-average model keeps the last `window` raw frames; `mean` is
    always the exact arithmetic mean of the buffer. A single owner must push
    frames in temporal order.
    """

    def __init__(self, mode: str = "moving_average", window: int = 10):
        if window < 1:
            raise ValueError("window must be >= 1")
        if mode not in ("static", "moving_average"):
            raise ValueError(f"unknown background mode {mode!r}")
        self.mode = mode
        self.window = window
        self.buffer: deque[np.ndarray] = deque(maxlen=window)
        self.mean: Optional[np.ndarray] = None

    def push(self, frame: Frame) -> None:
        self.buffer.append(np.asarray(frame.intensities, dtype=float))
        self.mean = np.mean(np.stack(self.buffer), axis=0)

    @property
    def full(self) -> bool:
        return len(self.buffer) == self.window


def normalize_with_background(frame: Frame, model: BackgroundModel) -> Frame:
    """Divide a frame by the background mean, then update a moving-average model.

    The division uses the mean of the frames seen so far; afterwards, for
    moving-average mode, the oldest buffered frame is replaced by this frame
    and the mean recomputed. Static models are left unchanged.
    """
    if model.mean is None:
        raise ValueError("background model holds no frames")
    if model.mean.shape != frame.intensities.shape:
        raise DataError(
            f"background {model.mean.shape} does not match frame {frame.intensities.shape}"
        )
    divided = frame.intensities / np.maximum(model.mean, EPS_DIV)
    if model.mode == "moving_average":
        model.push(frame)
    return Frame(divided, index=frame.index, pixel_size=frame.pixel_size)


def normalize_intensity(image: np.ndarray) -> np.ndarray:
    """Affine map of observed [min, max] onto [0, 1]; zero-range input maps to zeros."""
    lo = float(image.min())
    hi = float(image.max())
    if hi - lo <= 0:
        return np.zeros_like(image, dtype=float)
    return (image - lo) / (hi - lo)


def preprocess(frame: Frame, config: PreprocessConfig) -> Frame:
    """Apply the fixed chain: crop -> resize -> normalize -> Gaussian blur.

    The crop is either the configured ROI or a uniform boundary margin.
    pixel_size metadata is divided by resize_factor so positions keep their
    physical meaning.
    """
    config.validate()
    img = np.asarray(frame.intensities)
    if not np.issubdtype(img.dtype, np.floating):
        img = img.astype(float)

    if config.roi is not None:
        x0, y0, w, h = config.roi
        if x0 < 0 or y0 < 0 or w <= 0 or h <= 0 or x0 + w > img.shape[1] or y0 + h > img.shape[0]:
            raise ValueError(f"roi {config.roi} outside frame {img.shape[1]}x{img.shape[0]}")
        img = img[y0 : y0 + h, x0 : x0 + w]
    elif config.boundary_margin > 0:
        m = config.boundary_margin
        if img.shape[0] <= 2 * m or img.shape[1] <= 2 * m:
            raise ValueError(f"boundary_margin {m} leaves no pixels")
        img = img[m:-m, m:-m]

    pixel_size = frame.pixel_size
    if config.resize_factor != 1.0:
        out_h = int(round(img.shape[0] * config.resize_factor))
        out_w = int(round(img.shape[1] * config.resize_factor))
        if out_h < 1 or out_w < 1:
            raise ValueError("resize_factor yields an empty image")
        img = resize_bilinear(img, (out_h, out_w))
        pixel_size = pixel_size / config.resize_factor

    if config.normalize:
        img = normalize_intensity(img)

    if config.gaussian_kernel:
        img = gaussian_blur(img, config.gaussian_kernel, config.gaussian_kernel / 6.0)

    return Frame(img, index=frame.index, pixel_size=pixel_size)


def _to_gray(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 3:
        arr = arr[..., :3] @ _LUMA
    arr = arr.astype(float)
    return arr


def read_image(path: Path) -> np.ndarray:
    """Read one raster image as a float grid; integer types are scaled to [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    if np.issubdtype(arr.dtype, np.integer):
        scale = float(np.iinfo(arr.dtype).max)
        return _to_gray(arr) / scale
    return _to_gray(arr)


def load_sequence(dir_path: str | Path, pixel_size: float = 132.0) -> Iterator[Frame]:
    """Yield frames from a directory of grayscale raster images.

    Files sort lexicographically into temporal order; indices start at 0.
    Color input is reduced to luminance.
    """
    directory = Path(dir_path)
    if not directory.is_dir():
        raise DataError(f"no such directory: {directory}")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not paths:
        raise DataError(f"no frames found in {directory}")

    shape = None
    for index, path in enumerate(paths):
        img = read_image(path)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise DataError(
                f"inconsistent dimensions: {path.name} is {img.shape}, expected {shape}"
            )
        yield Frame(img, index=index, pixel_size=pixel_size)


def write_image(path: Path, image: np.ndarray) -> None:
    """Write a [0, 1] float grid as 16-bit PNG or 8-bit PGM depending on suffix."""
    arr = np.clip(np.asarray(image, dtype=float), 0.0, 1.0)
    if path.suffix.lower() == ".pgm":
        Image.fromarray((arr * 255).round().astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray((arr * 65535).round().astype(np.uint16)).save(path)
