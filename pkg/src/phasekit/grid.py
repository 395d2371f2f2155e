"""Raster data types and the phase/phasor algebra every other module builds on.

Wrapped phases live in (-pi, pi]; the half-open end makes arg(-1) = +pi
deterministic. All grids are row-major float32 numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegeneratePhasor,
    InvalidMargin,
    InvalidValue,
    OutOfBounds,
)

TWO_PI = 2.0 * np.pi


def wrap(angle):
    """Wrap angle(s) in radians to (-pi, pi].

    Accepts scalars or arrays; preserves shape. Raises InvalidValue on
    non-finite input.
    """
    a = np.asarray(angle)
    if not np.all(np.isfinite(a)):
        raise InvalidValue("wrap() requires finite angles")
    # remainder is exact for finite floats, so wrap(wrap(x)) == wrap(x)
    w = np.remainder(a + np.pi, TWO_PI) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    if np.isscalar(angle) or np.ndim(angle) == 0:
        return float(w)
    return w


def _as_grid(data, name):
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidValue(f"{name} must be a 2-D grid with positive dims, got shape {arr.shape}")
    return arr


_PI32 = np.float32(np.pi)  # smallest float32 >= pi; range checks run at storage resolution


@dataclass(frozen=True)
class PhaseImage:
    """H x W grid of wrapped phase values in radians, each in (-pi, pi].

    Values are stored as float32, so the range check admits anything within
    one float32 ulp of the interval: float64 phases arbitrarily close to
    -pi legitimately round to -float32(pi).
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _as_grid(self.data, "PhaseImage")
        if not np.all(np.isfinite(arr)):
            raise InvalidValue("PhaseImage contains non-finite values")
        if np.any(arr < -_PI32) or np.any(arr > _PI32):
            raise InvalidValue("PhaseImage values must lie in (-pi, pi]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class UnwrappedImage:
    """H x W grid of unwrapped phase in radians; no range invariant."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_grid(self.data, "UnwrappedImage")
        if not np.all(np.isfinite(arr)):
            raise InvalidValue("UnwrappedImage contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    def wrapped(self) -> PhaseImage:
        return PhaseImage(wrap(self.data.astype(np.float64)).astype(np.float32))


@dataclass(frozen=True)
class CoherenceMap:
    """H x W grid of coherence gamma, each value in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_grid(self.data, "CoherenceMap")
        if not np.all(np.isfinite(arr)):
            raise InvalidValue("CoherenceMap contains non-finite values")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidValue("CoherenceMap values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class ComplexField:
    """H x W field of phasors stored as separate real/imag float32 grids.

    Fields produced by phase_to_phasor hold unit phasors; arbitrary complex
    values (e.g. window means) are also representable.
    """

    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self):
        re = _as_grid(self.real, "ComplexField.real")
        im = _as_grid(self.imag, "ComplexField.imag")
        if re.shape != im.shape:
            raise InvalidValue(f"channel shapes differ: {re.shape} vs {im.shape}")
        object.__setattr__(self, "real", re)
        object.__setattr__(self, "imag", im)

    @property
    def height(self):
        return self.real.shape[0]

    @property
    def width(self):
        return self.real.shape[1]


@dataclass(frozen=True)
class Patch:
    """Square window of a ComplexField, optionally with its center zeroed."""

    real: np.ndarray
    imag: np.ndarray
    center_zeroed: bool = False
    size: int = field(init=False)

    def __post_init__(self):
        re = np.asarray(self.real, dtype=np.float32)
        im = np.asarray(self.imag, dtype=np.float32)
        if re.shape != im.shape or re.ndim != 2 or re.shape[0] != re.shape[1]:
            raise InvalidValue(f"patch channels must be square and equal-shaped, got {re.shape}/{im.shape}")
        n = re.shape[0]
        if n < 5 or n % 2 == 0:
            raise InvalidValue(f"patch size must be odd and >= 5, got {n}")
        if self.center_zeroed:
            c = n // 2
            if re[c, c] != 0.0 or im[c, c] != 0.0:
                raise InvalidValue("center_zeroed patch must have exact zeros at the center pixel")
        object.__setattr__(self, "real", re)
        object.__setattr__(self, "imag", im)
        object.__setattr__(self, "size", n)


def phase_to_phasor(p: PhaseImage | UnwrappedImage) -> ComplexField:
    """Pixel-wise (cos theta, sin theta) representation of a phase image."""
    theta = p.data
    return ComplexField(np.cos(theta), np.sin(theta))


def arg_with_fallback(real, imag):
    """Four-quadrant arctangent in (-pi, pi] with phase 0 where real=imag=0.

    Returns (phase_float32, degenerate_mask). The mask marks pixels that had
    no phase information; callers typically flag their coherence as 0.
    """
    re = np.asarray(real, dtype=np.float64)
    im = np.asarray(imag, dtype=np.float64)
    degenerate = (re == 0.0) & (im == 0.0)
    phase = np.arctan2(im, re)
    phase = np.where(phase == -np.pi, np.pi, phase)  # arctan2(-0.0, x<0) -> -pi
    phase = np.where(degenerate, 0.0, phase)
    return phase.astype(np.float32), degenerate


def phasor_to_phase(c: ComplexField) -> PhaseImage:
    """Pixel-wise arg of the field; raises DegeneratePhasor on any zero phasor."""
    phase, degenerate = arg_with_fallback(c.real, c.imag)
    if np.any(degenerate):
        n = int(degenerate.sum())
        raise DegeneratePhasor(f"{n} pixel(s) have zero real and imaginary parts")
    return PhaseImage(phase)


def extract_patch(c: ComplexField, row: int, col: int, size: int, zero_center: bool = True) -> Patch:
    """Copy the size x size window centered at (row, col).

    zero_center overwrites both channels of the center pixel with exact 0,
    the form the patch network is trained on.
    """
    if size < 5 or size % 2 == 0:
        raise InvalidValue(f"patch size must be odd and >= 5, got {size}")
    half = size // 2
    r0, c0 = row - half, col - half
    r1, c1 = row + half + 1, col + half + 1
    if r0 < 0 or c0 < 0 or r1 > c.height or c1 > c.width:
        raise OutOfBounds(
            f"{size}x{size} window at ({row},{col}) exceeds {c.height}x{c.width} field"
        )
    re = c.real[r0:r1, c0:c1].copy()
    im = c.imag[r0:r1, c0:c1].copy()
    if zero_center:
        re[half, half] = 0.0
        im[half, half] = 0.0
    return Patch(re, im, center_zeroed=zero_center)


def pad_reflect(c: ComplexField, margin: int) -> ComplexField:
    """Grow the field by `margin` on every side, mirroring without repeating the edge."""
    if margin < 0 or margin >= min(c.height, c.width):
        raise InvalidMargin(f"margin {margin} invalid for {c.height}x{c.width} field")
    if margin == 0:
        return ComplexField(c.real.copy(), c.imag.copy())
    re = np.pad(c.real, margin, mode="reflect")
    im = np.pad(c.imag, margin, mode="reflect")
    return ComplexField(re, im)


def pad_reflect_array(data: np.ndarray, margin: int) -> np.ndarray:
    """pad_reflect for a bare 2-D array (shared by the filters)."""
    h, w = data.shape
    if margin < 0 or margin >= min(h, w):
        raise InvalidMargin(f"margin {margin} invalid for {h}x{w} array")
    if margin == 0:
        return data.copy()
    return np.pad(data, margin, mode="reflect")
