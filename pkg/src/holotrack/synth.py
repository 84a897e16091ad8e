"""Ground-truth synthetic holograms and motion videos.

Scatterers are soft-edged amplitude discs carved out of a unit plane wave and
forward-propagated to the detector with the conjugate of the reconstruction
kernel, so backward scanning refocuses them at the true z. The soft (1 px)
edge keeps the rendered pattern center an exactly linear function of the
sub-pixel particle position.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .frame_io import Frame
from .holo import OpticalConfig, propagate_2d

Position = tuple[float, float, float]  # (x_um, y_um, z_um)
Motion = Callable[[int], Position]


@dataclass
class ParticleSpec:
    x_um: float
    y_um: float
    z_um: float
    radius_um: float = 0.5
    amplitude: float = 1.0


@dataclass
class SceneSpec:
    particles: list[ParticleSpec]
    optics: OpticalConfig = field(default_factory=OpticalConfig)
    frame_shape: tuple[int, int] = (512, 512)  # (width, height)
    noise_sigma: float = 0.0
    motions: Optional[list[Motion]] = None
    frames: int = 1
    frame_rate: float = 200.0
    seed: int = 0
    phase_disc: bool = False

    def validate(self) -> None:
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.motions is not None and len(self.motions) != len(self.particles):
            raise ValueError("one motion per particle required")
        w, h = self.frame_shape
        for p in self.particles:
            x_px = p.x_um * 1e3 / self.optics.pixel_size
            y_px = p.y_um * 1e3 / self.optics.pixel_size
            if not (0 <= x_px < w and 0 <= y_px < h):
                raise ValueError(f"particle at ({p.x_um}, {p.y_um}) um outside frame")


class GroundTruthRow(NamedTuple):
    frame: int
    particle_id: int
    x_px: float
    y_px: float
    z_um: float


def _soft_disc(n: int, cx: float, cy: float, radius_px: float) -> np.ndarray:
    ax = np.arange(n)
    rr = np.hypot(ax[None, :] - cx, ax[:, None] - cy)
    return np.clip(radius_px - rr + 0.5, 0.0, 1.0)


@lru_cache(maxsize=32)
def _disc_spectrum(
    n: int, z_um: float, radius_px: float, wavelength: float, index: float, pixel: float
) -> np.ndarray:
    """Spectrum of a center-placed disc forward-propagated by z (cached).

    The propagation is z-invariant per particle, so motion videos reuse this
    and shift it with a phase ramp per frame.
    """
    optics = OpticalConfig(wavelength, index, pixel)
    disc = _soft_disc(n, n // 2, n // 2, radius_px)
    field = propagate_2d(disc, -z_um, optics)
    spectrum = np.fft.fft2(field, norm="ortho")
    spectrum.setflags(write=False)
    return spectrum


def scatter_field(
    particles: Sequence[tuple[float, float, float, float, float]],
    optics: OpticalConfig,
    n: int,
    phase_disc: bool = False,
) -> np.ndarray:
    """Complex detector-plane field for (x_px, y_px, z_um, radius_px, amplitude) scatterers.

    The unit background plus one forward-propagated disc term per particle;
    fields combine additively. Each disc is propagated once at the grid
    center and moved into place by an exact Fourier shift (propagation and
    translation commute on the periodic grid).
    """
    accum = np.zeros((n, n), dtype=complex)
    f = np.fft.fftfreq(n)
    any_term = False
    for x_px, y_px, z_um, radius_px, amplitude in particles:
        spectrum = _disc_spectrum(
            n, float(z_um), float(radius_px),
            optics.wavelength_vacuum, optics.refractive_index, optics.pixel_size,
        )
        dx, dy = x_px - n // 2, y_px - n // 2
        ramp = np.exp(-2j * np.pi * (f[:, None] * dy + f[None, :] * dx))
        accum += amplitude * spectrum * ramp
        any_term = True
    u = np.ones((n, n), dtype=complex)
    if any_term:
        shifted = np.fft.ifft2(accum, norm="ortho")
        if phase_disc:
            u += (np.exp(0.5j * np.pi) - 1.0) * shifted
        else:
            u -= shifted
    return u


def _render(
    positions: Sequence[Position],
    spec: SceneSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    w, h = spec.frame_shape
    n = max(w, h)
    px = spec.optics.pixel_size
    parts = []
    for p, (x_um, y_um, z_um) in zip(spec.particles, positions):
        parts.append(
            (
                x_um * 1e3 / px + (n - w) // 2,
                y_um * 1e3 / px + (n - h) // 2,
                z_um,
                p.radius_um * 1e3 / px,
                p.amplitude,
            )
        )
    u = scatter_field(parts, spec.optics, n, spec.phase_disc)
    oy, ox = (n - h) // 2, (n - w) // 2
    intensity = np.abs(u[oy : oy + h, ox : ox + w]) ** 2
    lo, hi = float(intensity.min()), float(intensity.max())
    img = np.zeros_like(intensity) if hi - lo <= 0 else (intensity - lo) / (hi - lo)
    if spec.noise_sigma > 0:
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
        img = np.clip(img, 0.0, 1.0)
    return img


def synth_hologram(spec: SceneSpec) -> Frame:
    """Render a single frame of the scene at the particles' rest positions."""
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0])
    img = _render([(p.x_um, p.y_um, p.z_um) for p in spec.particles], spec, rng)
    return Frame(img, index=0, pixel_size=spec.optics.pixel_size)


def synth_motion_video(spec: SceneSpec) -> tuple[list[Frame], list[GroundTruthRow]]:
    """Render a frame sequence plus the exact (frame, id, x_px, y_px, z_um) table."""
    spec.validate()
    px = spec.optics.pixel_size
    frames: list[Frame] = []
    truth: list[GroundTruthRow] = []
    for t in range(spec.frames):
        if spec.motions is None:
            positions = [(p.x_um, p.y_um, p.z_um) for p in spec.particles]
        else:
            positions = [m(t) for m in spec.motions]
        rng = np.random.default_rng([spec.seed, t])
        img = _render(positions, spec, rng)
        frames.append(Frame(img, index=t, pixel_size=px))
        for pid, (x_um, y_um, z_um) in enumerate(positions):
            truth.append(GroundTruthRow(t, pid, x_um * 1e3 / px, y_um * 1e3 / px, z_um))
    return frames, truth


def static_motion(p: ParticleSpec) -> Motion:
    return lambda t: (p.x_um, p.y_um, p.z_um)


def linear_motion(p: ParticleSpec, vx_um_frame: float, vy_um_frame: float = 0.0) -> Motion:
    return lambda t: (p.x_um + vx_um_frame * t, p.y_um + vy_um_frame * t, p.z_um)


def sinusoid_motion(
    p: ParticleSpec, amplitude_um: float, period_frames: float, axis: str = "x", phase: float = 0.0
) -> Motion:
    def pos(t: int) -> Position:
        d = amplitude_um * np.sin(2 * np.pi * t / period_frames + phase)
        if axis == "x":
            return (p.x_um + d, p.y_um, p.z_um)
        return (p.x_um, p.y_um + d, p.z_um)

    return pos


def poiseuille_speed(z_um: float, v_max: float, channel_height: float) -> float:
    """Parabolic laminar profile v(z) = 4 v_max (z/h)(1 - z/h), in um/s."""
    zh = z_um / channel_height
    return 4.0 * v_max * zh * (1.0 - zh)


def poiseuille_motion(
    p: ParticleSpec,
    v_max: float,
    channel_height: float,
    frame_rate: float,
    wrap_um: Optional[float] = None,
) -> Motion:
    """Advection along x at the particle's height; optionally wraps at wrap_um."""
    v_frame = poiseuille_speed(p.z_um, v_max, channel_height) / frame_rate

    def pos(t: int) -> Position:
        x = p.x_um + v_frame * t
        if wrap_um is not None:
            x = x % wrap_um
        return (x, p.y_um, p.z_um)

    return pos
