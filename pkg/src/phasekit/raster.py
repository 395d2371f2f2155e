"""Bit-exact .igrd raster I/O and PNG rendering.

File layout (little-endian throughout):

    bytes 0..3    magic "IGRD"
    bytes 4..7    version, uint32 = 1
    bytes 8..11   width, uint32
    bytes 12..15  height, uint32
    bytes 16..19  channels, uint32 (1 or 2)
    bytes 20..    channels * height * width float32, planar, row-major

A 2-channel file holds a ComplexField (real plane then imag plane); a
1-channel file holds a phase, unwrapped-phase, or coherence grid -- the
header does not record which, so readers pass `expect` when they know.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import FormatError, InvalidValue, IoError
from .grid import CoherenceMap, ComplexField, PhaseImage, UnwrappedImage

MAGIC = b"IGRD"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class RasterHeader:
    width: int
    height: int
    channels: int
    version: int = VERSION

    def __post_init__(self):
        if self.version != VERSION:
            raise FormatError(f"unsupported version {self.version}")
        if self.channels not in (1, 2):
            raise FormatError(f"channels must be 1 or 2, got {self.channels}")
        if self.width < 1 or self.height < 1:
            raise FormatError(f"bad dimensions {self.width}x{self.height}")

    def pack(self) -> bytes:
        return _HEADER.pack(MAGIC, self.version, self.width, self.height, self.channels)

    @classmethod
    def unpack(cls, blob: bytes) -> "RasterHeader":
        if len(blob) < _HEADER.size:
            raise FormatError("file shorter than the 20-byte header")
        magic, version, width, height, channels = _HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if channels not in (1, 2):
            raise FormatError(f"channels must be 1 or 2, got {channels}")
        if width < 1 or height < 1:
            raise FormatError(f"bad dimensions {width}x{height}")
        return cls(width=width, height=height, channels=channels, version=version)


def _planes(data) -> list[np.ndarray]:
    if isinstance(data, ComplexField):
        return [data.real, data.imag]
    if isinstance(data, (PhaseImage, UnwrappedImage, CoherenceMap)):
        return [data.data]
    raise InvalidValue(f"cannot write object of type {type(data).__name__}")


def write_raster(path, data) -> None:
    """Write a grid type to an .igrd file; roundtrips bit-exactly."""
    planes = _planes(data)
    header = RasterHeader(width=planes[0].shape[1], height=planes[0].shape[0], channels=len(planes))
    try:
        with open(path, "wb") as fh:
            fh.write(header.pack())
            for plane in planes:
                fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoError(f"writing {path}: {exc}") from exc


def read_raster(path, expect: str | None = None):
    """Read an .igrd file back into a grid type.

    expect: one of None, "phase", "unwrapped", "coherence", "complex".
    With None, 2-channel files become ComplexField and 1-channel files
    become PhaseImage when the values fit (-pi, pi], else UnwrappedImage.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"reading {path}: {exc}") from exc
    header = RasterHeader.unpack(blob)
    need = header.channels * header.height * header.width * 4
    payload = blob[_HEADER.size:]
    if len(payload) < need:
        raise FormatError(f"truncated payload: need {need} bytes, have {len(payload)}")
    if len(payload) > need:
        raise FormatError(f"trailing bytes after payload: {len(payload) - need}")
    raw = np.frombuffer(payload, dtype="<f4").reshape(header.channels, header.height, header.width)
    planes = [raw[i].copy() for i in range(header.channels)]

    if expect == "complex":
        if header.channels != 2:
            raise FormatError(f"expected 2-channel complex raster, got {header.channels}")
        return ComplexField(planes[0], planes[1])
    if expect in ("phase", "unwrapped", "coherence"):
        if header.channels != 1:
            raise FormatError(f"expected 1-channel raster, got {header.channels}")
        if expect == "phase":
            return PhaseImage(planes[0])
        if expect == "unwrapped":
            return UnwrappedImage(planes[0])
        return CoherenceMap(planes[0])
    if expect is not None:
        raise InvalidValue(f"unknown expect kind {expect!r}")

    if header.channels == 2:
        return ComplexField(planes[0], planes[1])
    data = planes[0]
    if np.all(np.isfinite(data)) and np.all(data > -np.pi) and np.all(data <= np.pi):
        return PhaseImage(data)
    return UnwrappedImage(data)


def phase_to_rgb(theta: np.ndarray) -> np.ndarray:
    """Colormap for phase display: hue 240 deg at -pi (blue) to 0 deg at +pi (red).

    Full saturation and value; input in [-pi, pi]; returns uint8 (H, W, 3).
    """
    t = np.asarray(theta, dtype=np.float64)
    hue = 240.0 * (np.pi - t) / (2.0 * np.pi)  # degrees in [0, 240]
    hp = hue / 60.0
    x = 1.0 - np.abs(np.mod(hp, 2.0) - 1.0)
    zeros = np.zeros_like(hp)
    ones = np.ones_like(hp)
    # sectors 0..3 cover hue [0, 240]: red->yellow->green->cyan->blue
    r = np.select([hp < 1, hp < 2, hp < 3, hp <= 4], [ones, x, zeros, zeros])
    g = np.select([hp < 1, hp < 2, hp < 3, hp <= 4], [x, ones, ones, x])
    b = np.select([hp < 1, hp < 2, hp < 3, hp <= 4], [zeros, zeros, x, ones])
    rgb = np.stack([r, g, b], axis=-1)
    return np.round(255.0 * rgb).astype(np.uint8)


def coherence_to_gray(gamma: np.ndarray) -> np.ndarray:
    """gray = round(255 * gamma), uint8."""
    return np.round(255.0 * np.asarray(gamma, dtype=np.float64)).astype(np.uint8)


def render_png(data, path) -> None:
    """Render a PhaseImage (hue map) or CoherenceMap (grayscale) to PNG."""
    if isinstance(data, PhaseImage):
        img = Image.fromarray(phase_to_rgb(data.data), mode="RGB")
    elif isinstance(data, CoherenceMap):
        img = Image.fromarray(coherence_to_gray(data.data), mode="L")
    else:
        raise InvalidValue(f"cannot render object of type {type(data).__name__}")
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"writing {path}: {exc}") from exc
