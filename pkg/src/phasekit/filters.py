"""Boxcar and Goldstein baselines for like-for-like comparison runs.

Boxcar is the complex moving average of the unit phasors: its argument is
the filtered phase and its magnitude the sample coherence. Goldstein
filters overlapping FFT patches by raising the smoothed spectral magnitude
to an exponent alpha, then overlap-adds with a raised-cosine window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ImageTooSmall, InvalidValue
from .grid import CoherenceMap, ComplexField, PhaseImage, arg_with_fallback, pad_reflect_array


@dataclass(frozen=True)
class BoxcarConfig:
    window: int = 7

    def __post_init__(self):
        # window 1 (the identity) is allowed for testing; real configs use >= 3
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidValue(f"boxcar window must be odd and >= 1, got {self.window}")


@dataclass(frozen=True)
class GoldsteinConfig:
    patch: int = 32
    overlap: int = 16
    alpha: float = 0.5
    smoothing: int = 3

    def __post_init__(self):
        if self.patch < 4 or (self.patch & (self.patch - 1)) != 0:
            raise InvalidValue(f"goldstein patch must be a power of two >= 4, got {self.patch}")
        if not (0 <= self.overlap < self.patch):
            raise InvalidValue(f"overlap must satisfy 0 <= overlap < patch, got {self.overlap}")
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidValue(f"alpha must be in [0, 1], got {self.alpha}")
        if self.smoothing < 1 or self.smoothing % 2 == 0:
            raise InvalidValue(f"smoothing kernel must be odd and >= 1, got {self.smoothing}")


def _window_mean(plane: np.ndarray, window: int) -> np.ndarray:
    """Mean over a window x window neighborhood, reflect-padded, float64."""
    if window == 1:
        return plane.astype(np.float64)
    half = window // 2
    padded = pad_reflect_array(plane.astype(np.float64), half)
    windows = sliding_window_view(padded, (window, window))
    return np.einsum("hwij->hw", windows) / float(window * window)


def boxcar_filter(c: ComplexField, cfg: BoxcarConfig = BoxcarConfig()):
    """Complex window mean; returns (PhaseImage, CoherenceMap).

    Zero window means (e.g. exactly cancelling phasors) fall back to
    phase 0 and coherence 0.
    """
    if c.height < cfg.window or c.width < cfg.window:
        raise ImageTooSmall(f"{c.height}x{c.width} field smaller than window {cfg.window}")
    mean_re = _window_mean(c.real, cfg.window)
    mean_im = _window_mean(c.imag, cfg.window)
    phase, _ = arg_with_fallback(mean_re, mean_im)
    coherence = np.clip(np.hypot(mean_re, mean_im), 0.0, 1.0)
    return PhaseImage(phase), CoherenceMap(coherence.astype(np.float32))


def _patch_starts(extent: int, patch: int, step: int) -> list[int]:
    starts = list(range(0, extent - patch + 1, step))
    if starts[-1] != extent - patch:
        starts.append(extent - patch)  # clamp the last patch to the border
    return starts


def _raised_cosine(patch: int) -> np.ndarray:
    # offset so the weight never reaches zero; border pixels covered by a
    # single clamped patch would otherwise divide by zero in the blend
    i = np.arange(patch, dtype=np.float64)
    w1d = 0.5 - 0.5 * np.cos(2.0 * np.pi * (i + 0.5) / patch)
    return np.outer(w1d, w1d)


def goldstein_filter(c: ComplexField, cfg: GoldsteinConfig = GoldsteinConfig()) -> PhaseImage:
    """Patch-FFT spectral filter; outputs phase only."""
    if c.height < cfg.patch or c.width < cfg.patch:
        raise ImageTooSmall(f"{c.height}x{c.width} field smaller than patch {cfg.patch}")
    z = c.real.astype(np.float64) + 1j * c.imag.astype(np.float64)
    step = cfg.patch - cfg.overlap
    weight = _raised_cosine(cfg.patch)
    acc = np.zeros_like(z)
    wsum = np.zeros(z.shape, dtype=np.float64)
    half = cfg.smoothing // 2

    for r0 in _patch_starts(c.height, cfg.patch, step):
        for c0 in _patch_starts(c.width, cfg.patch, step):
            block = z[r0:r0 + cfg.patch, c0:c0 + cfg.patch]
            spec = np.fft.fft2(block)
            if cfg.alpha == 0.0:
                filtered = block
            else:
                mag = np.abs(spec)
                if half > 0:
                    # wrap-around smoothing: the spectrum is periodic
                    padded = np.pad(mag, half, mode="wrap")
                    windows = sliding_window_view(padded, (cfg.smoothing, cfg.smoothing))
                    mag = np.einsum("hwij->hw", windows) / float(cfg.smoothing**2)
                filtered = np.fft.ifft2(spec * mag**cfg.alpha)
            acc[r0:r0 + cfg.patch, c0:c0 + cfg.patch] += weight * filtered
            wsum[r0:r0 + cfg.patch, c0:c0 + cfg.patch] += weight

    blended = acc / wsum
    phase, _ = arg_with_fallback(blended.real, blended.imag)
    return PhaseImage(phase)
