"""Angular-spectrum propagation and axial (z) reconstruction.

The 2D transfer function follows H = exp[(-2*pi*j*z/lam) * sqrt(1 - (lam*P/S)^2
- (lam*Q/S)^2)] on pixel indices P, Q in [-N/2, N/2); the 1D variant applies
the same kernel to a mirrored radial intensity profile, which is what makes
per-particle z-scans cheap. All wavelengths are in-medium.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .refine import RadialProfile

OUTER_FRACTION = 0.1  # share of outer samples that defines the background level
WIENER_EPS_FRACTION = 1e-3


@dataclass
class OpticalConfig:
    wavelength_vacuum: float = 470.0  # nm
    refractive_index: float = 1.33
    pixel_size: float = 132.0  # nm/px

    def validate(self) -> None:
        if self.wavelength_vacuum <= 0 or self.refractive_index <= 0 or self.pixel_size <= 0:
            raise ValueError("optical parameters must be positive")

    @property
    def effective_wavelength(self) -> float:
        return self.wavelength_vacuum / self.refractive_index


@dataclass
class ZScan:
    z_start: float  # um
    z_step: float
    z_end: float

    def validate(self) -> None:
        if self.z_step <= 0:
            raise ValueError("z_step must be positive")
        if self.z_end <= self.z_start:
            raise ValueError("z_end must exceed z_start")

    def grid(self) -> np.ndarray:
        self.validate()
        n = int(np.floor((self.z_end - self.z_start) / self.z_step + 1e-9)) + 1
        return self.z_start + self.z_step * np.arange(n)


@dataclass
class AxialReconstruction:
    z_values: np.ndarray  # um
    intensities: np.ndarray
    z_star: float
    curve_complete: bool = True


def _transfer_1d(m: int, z_um: float, lam_nm: float, s_nm: float) -> np.ndarray:
    r = np.fft.fftfreq(m) * m
    radicand = 1.0 - (lam_nm * r / s_nm) ** 2
    h = np.zeros(m, dtype=complex)
    prop = radicand >= 0
    h[prop] = np.exp(-2j * np.pi * (z_um * 1e3) / lam_nm * np.sqrt(radicand[prop]))
    return h


def propagate_2d(field: np.ndarray, z_um: float, optics: OpticalConfig) -> np.ndarray:
    """Propagate a square complex field by z micrometers (unitary transforms).

    Evanescent components (negative radicand) are zeroed.
    """
    optics.validate()
    field = np.asarray(field, dtype=complex)
    if field.ndim != 2 or field.shape[0] != field.shape[1]:
        raise ValueError(f"field must be square, got {field.shape}")
    n = field.shape[0]
    s = n * optics.pixel_size
    lam = optics.effective_wavelength
    f = np.fft.fftfreq(n) * n
    radicand = 1.0 - (lam * f[:, None] / s) ** 2 - (lam * f[None, :] / s) ** 2
    h = np.zeros((n, n), dtype=complex)
    prop = radicand >= 0
    h[prop] = np.exp(-2j * np.pi * (z_um * 1e3) / lam * np.sqrt(radicand[prop]))
    spectrum = np.fft.fft2(field, norm="ortho")
    return np.fft.ifft2(spectrum * h, norm="ortho")


def propagate_1d(profile: RadialProfile, z_um: float, optics: OpticalConfig) -> np.ndarray:
    """Propagate a mirrored radial profile by z micrometers."""
    optics.validate()
    values = np.asarray(profile.values, dtype=complex)
    m = len(values)
    if m % 2:
        raise ValueError("profile length must be even (mirrored)")
    s = m * profile.delta_r * optics.pixel_size
    h = _transfer_1d(m, z_um, optics.effective_wavelength, s)
    return np.fft.ifft(np.fft.fft(values, norm="ortho") * h, norm="ortho")


def extend_profile(profile: RadialProfile, margin_factor: float) -> RadialProfile:
    """Pad both ends with the mean of the outer 10% of samples.

    The output length is round(margin_factor * M), adjusted up to keep the
    padding symmetric (even), so mirror symmetry survives.
    """
    if margin_factor < 1:
        raise ValueError("margin_factor must be >= 1")
    values = profile.values
    m = len(values)
    out_len = int(round(margin_factor * m))
    if (out_len - m) % 2:
        out_len += 1
    if out_len == m:
        return profile
    n_outer = max(1, int(round(OUTER_FRACTION * m)))
    pad_value = float(np.concatenate([values[:n_outer], values[-n_outer:]]).mean())
    pad = (out_len - m) // 2
    padded = np.concatenate([np.full(pad, pad_value), values, np.full(pad, pad_value)])
    return RadialProfile(
        padded, profile.delta_r, profile.origin_center, profile.mode, profile.heading
    )


def _background_level(values: np.ndarray) -> float:
    n_outer = max(1, int(round(OUTER_FRACTION * len(values))))
    return float(np.concatenate([values[:n_outer], values[-n_outer:]]).mean())


def _center_mask(length: int, mask_radius: int) -> slice:
    c0 = length // 2 - 1
    c1 = length // 2
    return slice(max(c0 - mask_radius, 0), min(c1 + mask_radius + 1, length))


def _scan_curve(
    values: np.ndarray,
    delta_r: float,
    z_values: np.ndarray,
    optics: OpticalConfig,
    mask_radius: int,
) -> np.ndarray:
    m = len(values)
    s = m * delta_r * optics.pixel_size
    lam = optics.effective_wavelength
    r = np.fft.fftfreq(m) * m
    radicand = 1.0 - (lam * r / s) ** 2
    prop = radicand >= 0
    root = np.sqrt(np.where(prop, radicand, 0.0))
    spectrum = np.fft.fft(values.astype(complex), norm="ortho")
    phase = np.exp(
        -2j * np.pi * (z_values[:, None] * 1e3) / lam * root[None, :]
    ) * prop[None, :]
    fields = np.fft.ifft(spectrum[None, :] * phase, axis=1, norm="ortho")
    sel = _center_mask(m, mask_radius)
    return np.mean(np.abs(fields[:, sel]) ** 2, axis=1)


def axial_scan(
    profile: RadialProfile,
    scan: ZScan,
    optics: OpticalConfig,
    mask_radius: int = 3,
    deconvolve: bool = False,
) -> AxialReconstruction:
    """Reconstructed center intensity over a z grid; z_star is the argmax.

    The background level (mean of the outer 10% of samples) is removed before
    propagation so the refocused scatterer registers as an on-axis intensity
    peak. Intensities average over mask_radius samples around the profile
    center; ties in the maximum resolve to the smallest z.
    """
    optics.validate()
    z_values = scan.grid()
    if len(z_values) == 0:
        raise ValueError("empty scan range")
    values = profile.values - _background_level(profile.values)
    curve = _scan_curve(values, profile.delta_r, z_values, optics, mask_radius)
    if deconvolve:
        curve = deconvolve_axial(curve, profile, scan, optics, mask_radius)
    complete = bool(np.all(np.isfinite(curve)))
    if not complete:
        curve = np.nan_to_num(curve)
    z_star = float(z_values[int(np.argmax(curve))])
    return AxialReconstruction(z_values, curve, z_star, complete)


def point_source_curve(
    profile: RadialProfile,
    scan: ZScan,
    optics: OpticalConfig,
    mask_radius: int = 3,
) -> np.ndarray:
    """Axial response of a unit impulse at the profile center.

    Evaluated on a symmetric window (same step and length as the scan)
    around the impulse's own focal plane at z = 0, so the curve is the
    reconstruction's axial point-spread function, peaked at the window
    center.
    """
    ref_values = np.zeros_like(profile.values, dtype=float)
    m = len(ref_values)
    ref_values[m // 2 - 1 : m // 2 + 1] = 1.0
    n = len(scan.grid())
    z_values = (np.arange(n) - n // 2) * scan.z_step
    return _scan_curve(ref_values, profile.delta_r, z_values, optics, mask_radius)


def deconvolve_axial(
    curve: np.ndarray,
    profile: RadialProfile,
    scan: ZScan,
    optics: OpticalConfig,
    mask_radius: int = 3,
) -> np.ndarray:
    """Wiener deconvolution of an axial curve by the point-source response.

    The reference is circularly centered on its own peak first, so peak
    positions in the input survive in the output. Output is clipped at 0.
    """
    curve = np.asarray(curve, dtype=float)
    ref = point_source_curve(profile, scan, optics, mask_radius)
    if not np.any(ref > 0):
        raise ValueError("all-zero point-source reference")
    ref = np.roll(ref, -int(np.argmax(ref)))
    fr = np.fft.fft(ref)
    power = np.abs(fr) ** 2
    eps = WIENER_EPS_FRACTION * float(power.max())
    out = np.fft.ifft(np.fft.fft(curve) * np.conj(fr) / (power + eps)).real
    return np.clip(out, 0.0, None)


def axial_scan_2d(
    template_pixels: np.ndarray,
    scan: ZScan,
    optics: OpticalConfig,
    mask_radius: int = 3,
    center: Optional[tuple[float, float]] = None,
) -> AxialReconstruction:
    """Reference z-scan via full 2D propagation of a (square) template.

    Slow by design; used to cross-check the 1D path. Intensity per z is the
    mean |field|^2 within mask_radius pixels of the center.
    """
    img = np.asarray(template_pixels, dtype=float)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError("template must be square")
    n = img.shape[0]
    if center is None:
        center = ((n - 1) / 2.0, (n - 1) / 2.0)
    border = np.concatenate([img[0], img[-1], img[:, 0], img[:, -1]])
    field = img - float(border.mean())
    z_values = scan.grid()
    yy, xx = np.mgrid[0:n, 0:n]
    mask = (xx - center[0]) ** 2 + (yy - center[1]) ** 2 <= mask_radius**2
    if not mask.any():
        mask[int(round(center[1])), int(round(center[0]))] = True
    curve = np.empty(len(z_values))
    for i, z in enumerate(z_values):
        u = propagate_2d(field, z, optics)
        curve[i] = float(np.mean(np.abs(u[mask]) ** 2))
    z_star = float(z_values[int(np.argmax(curve))])
    return AxialReconstruction(z_values, curve, z_star, True)
