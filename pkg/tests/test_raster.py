import struct

import numpy as np
import pytest
from PIL import Image

from phasekit.errors import FormatError, InvalidValue
from phasekit.grid import CoherenceMap, ComplexField, PhaseImage, UnwrappedImage
from phasekit.raster import (
    RasterHeader,
    coherence_to_gray,
    phase_to_rgb,
    read_raster,
    render_png,
    write_raster,
)

from conftest import random_unit_field


def test_complex_roundtrip_bit_exact(tmp_path, rng):
    field = random_unit_field(rng, 17, 23)
    path = tmp_path / "f.igrd"
    write_raster(path, field)
    back = read_raster(path)
    assert isinstance(back, ComplexField)
    assert back.real.tobytes() == field.real.tobytes()
    assert back.imag.tobytes() == field.imag.tobytes()


def test_single_channel_roundtrip(tmp_path, rng):
    coh = CoherenceMap(rng.random((9, 7)).astype(np.float32))
    path = tmp_path / "c.igrd"
    write_raster(path, coh)
    back = read_raster(path, expect="coherence")
    assert isinstance(back, CoherenceMap)
    assert back.data.tobytes() == coh.data.tobytes()


def test_unwrapped_roundtrip(tmp_path, rng):
    img = UnwrappedImage((rng.random((5, 5)) * 100).astype(np.float32))
    path = tmp_path / "u.igrd"
    write_raster(path, img)
    back = read_raster(path)
    assert isinstance(back, UnwrappedImage)
    assert np.array_equal(back.data, img.data)


def test_write_read_bytes_identical(tmp_path, rng):
    # writing the same object twice gives identical files
    field = random_unit_field(rng, 8, 8)
    p1, p2 = tmp_path / "a.igrd", tmp_path / "b.igrd"
    write_raster(p1, field)
    write_raster(p2, field)
    assert p1.read_bytes() == p2.read_bytes()


def test_header_dispatch(tmp_path, rng):
    field = random_unit_field(rng, 6, 6)
    phase = PhaseImage(np.zeros((6, 6), np.float32))
    write_raster(tmp_path / "two.igrd", field)
    write_raster(tmp_path / "one.igrd", phase)
    assert isinstance(read_raster(tmp_path / "two.igrd"), ComplexField)
    assert isinstance(read_raster(tmp_path / "one.igrd"), PhaseImage)


def test_truncated_payload(tmp_path, rng):
    path = tmp_path / "t.igrd"
    write_raster(path, random_unit_field(rng, 6, 6))
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(FormatError):
        read_raster(path)


def test_trailing_bytes(tmp_path, rng):
    path = tmp_path / "t.igrd"
    write_raster(path, random_unit_field(rng, 6, 6))
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(FormatError):
        read_raster(path)


def test_bad_magic_and_version(tmp_path, rng):
    path = tmp_path / "t.igrd"
    write_raster(path, random_unit_field(rng, 4, 4))
    blob = bytearray(path.read_bytes())
    blob[:4] = b"NOPE"
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        read_raster(path)
    blob[:4] = b"IGRD"
    struct.pack_into("<I", blob, 4, 99)
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError):
        read_raster(path)


def test_expect_mismatch(tmp_path, rng):
    path = tmp_path / "t.igrd"
    write_raster(path, random_unit_field(rng, 4, 4))
    with pytest.raises(FormatError):
        read_raster(path, expect="phase")


def test_header_validation():
    with pytest.raises(FormatError):
        RasterHeader(width=4, height=4, channels=3)
    with pytest.raises(FormatError):
        RasterHeader(width=0, height=4, channels=1)


class TestRender:
    def test_zero_coherence_black(self, tmp_path):
        path = tmp_path / "c.png"
        render_png(CoherenceMap(np.zeros((4, 4), np.float32)), path)
        img = np.asarray(Image.open(path))
        assert img.shape == (4, 4)
        assert np.all(img == 0)

    def test_full_coherence_white(self, tmp_path):
        path = tmp_path / "c.png"
        render_png(CoherenceMap(np.ones((4, 4), np.float32)), path)
        assert np.all(np.asarray(Image.open(path)) == 255)

    def test_gray_is_rounded_scale(self):
        gray = coherence_to_gray(np.array([[0.0, 0.5, 1.0]]))
        np.testing.assert_array_equal(gray, [[0, 128, 255]])

    def test_minus_pi_is_pure_blue(self):
        # hue 240 deg at -pi; the colormap itself covers the closed interval
        rgb = phase_to_rgb(np.array([[-np.pi]]))
        np.testing.assert_array_equal(rgb[0, 0], [0, 0, 255])

    def test_plus_pi_is_pure_red(self):
        rgb = phase_to_rgb(np.array([[np.pi]]))
        np.testing.assert_array_equal(rgb[0, 0], [255, 0, 0])

    def test_phase_png_written(self, tmp_path, rng):
        phase = PhaseImage(rng.uniform(-3, 3, (8, 8)).astype(np.float32))
        path = tmp_path / "p.png"
        render_png(phase, path)
        img = np.asarray(Image.open(path))
        assert img.shape == (8, 8, 3)

    def test_render_rejects_complex(self, tmp_path, rng):
        with pytest.raises(InvalidValue):
            render_png(random_unit_field(rng, 4, 4), tmp_path / "x.png")
