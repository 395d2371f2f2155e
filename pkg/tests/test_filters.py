import numpy as np
import pytest

from phasekit.errors import ImageTooSmall, InvalidValue
from phasekit.filters import BoxcarConfig, GoldsteinConfig, boxcar_filter, goldstein_filter
from phasekit.grid import ComplexField, PhaseImage, phase_to_phasor, wrap
from phasekit.metrics import count_residues, residue_map
from phasekit.simulate import NoiseSpec, add_noise

from conftest import circular_diff, random_unit_field


def fringe_with_noise(height, width, period=8, gamma=0.8, seed=21):
    cols = np.arange(width, dtype=np.float64)[None, :] * (2 * np.pi / period)
    truth = PhaseImage(wrap(np.broadcast_to(cols, (height, width)).copy()).astype(np.float32))
    return add_noise(truth, NoiseSpec(mode="uniform", gamma=gamma, seed=seed))


class TestBoxcar:
    def test_constant_field(self):
        field = ComplexField(np.ones((16, 16), np.float32), np.zeros((16, 16), np.float32))
        phase, coh = boxcar_filter(field, BoxcarConfig(window=7))
        np.testing.assert_allclose(phase.data, 0.0, atol=1e-12)
        np.testing.assert_allclose(coh.data, 1.0, atol=1e-6)

    def test_iid_uniform_phases_low_coherence(self, rng):
        # E|mean of 49 unit vectors| ~ sqrt(pi/(4*49)) ~ 0.127
        field = random_unit_field(rng, 512, 512)
        _, coh = boxcar_filter(field, BoxcarConfig(window=7))
        assert coh.data.mean() < 0.25

    def test_zero_field_falls_back(self):
        field = ComplexField(np.zeros((8, 8), np.float32), np.zeros((8, 8), np.float32))
        phase, coh = boxcar_filter(field, BoxcarConfig(window=3))
        assert np.all(phase.data == 0.0)
        assert np.all(coh.data == 0.0)

    def test_checkerboard_cancels(self):
        # alternating 0 / pi phasors mostly cancel over any odd window
        idx = np.indices((32, 32)).sum(axis=0) % 2
        field = ComplexField(np.where(idx == 0, 1.0, -1.0).astype(np.float32),
                             np.zeros((32, 32), np.float32))
        _, coh = boxcar_filter(field, BoxcarConfig(window=7))
        assert coh.data.max() < 0.05

    def test_window_one_is_identity(self, rng):
        field = random_unit_field(rng, 12, 12)
        phase, coh = boxcar_filter(field, BoxcarConfig(window=1))
        expected = np.arctan2(field.imag.astype(np.float64), field.real.astype(np.float64))
        assert np.max(circular_diff(phase.data, expected)) < 1e-6
        np.testing.assert_allclose(coh.data, 1.0, atol=1e-6)

    def test_coherence_always_in_unit_interval(self, rng):
        for _ in range(5):
            field = random_unit_field(rng, 33, 29)
            _, coh = boxcar_filter(field, BoxcarConfig(window=5))
            assert coh.data.min() >= 0.0
            assert coh.data.max() <= 1.0

    def test_deterministic(self, rng):
        field = random_unit_field(rng, 20, 20)
        a = boxcar_filter(field, BoxcarConfig())
        b = boxcar_filter(field, BoxcarConfig())
        assert np.array_equal(a[0].data, b[0].data)
        assert np.array_equal(a[1].data, b[1].data)

    def test_too_small_image(self, rng):
        with pytest.raises(ImageTooSmall):
            boxcar_filter(random_unit_field(rng, 5, 5), BoxcarConfig(window=7))

    def test_bad_window(self):
        with pytest.raises(InvalidValue):
            BoxcarConfig(window=4)


class TestGoldstein:
    def test_alpha_zero_identity(self):
        noisy = fringe_with_noise(96, 96)
        field = phase_to_phasor(noisy)
        out = goldstein_filter(field, GoldsteinConfig(alpha=0.0))
        assert np.max(circular_diff(out.data, noisy.data)) < 1e-5

    def test_fringe_residue_reduction(self):
        # single fringe at gamma=0.8: filtering removes >= 90% of residues
        noisy = fringe_with_noise(128, 128, period=8, gamma=0.8, seed=21)
        before = count_residues(residue_map(noisy))
        out = goldstein_filter(phase_to_phasor(noisy), GoldsteinConfig())
        after = count_residues(residue_map(out))
        assert before > 0
        assert after <= 0.10 * before

    def test_constant_field_constant_output(self):
        field = ComplexField(np.full((64, 64), 0.6, np.float32), np.full((64, 64), 0.8, np.float32))
        out = goldstein_filter(field, GoldsteinConfig())
        expected = np.arctan2(0.8, 0.6)
        assert np.max(circular_diff(out.data, expected)) < 1e-6

    def test_global_rotation_invariance(self, rng):
        field = random_unit_field(rng, 64, 64)
        delta = 0.7
        rotated = ComplexField(
            field.real * np.cos(delta) - field.imag * np.sin(delta),
            field.real * np.sin(delta) + field.imag * np.cos(delta),
        )
        base = goldstein_filter(field, GoldsteinConfig())
        rot = goldstein_filter(rotated, GoldsteinConfig())
        assert np.max(circular_diff(rot.data, base.data + delta)) < 1e-5

    def test_deterministic(self, rng):
        field = random_unit_field(rng, 48, 48)
        a = goldstein_filter(field, GoldsteinConfig())
        b = goldstein_filter(field, GoldsteinConfig())
        assert np.array_equal(a.data, b.data)

    def test_too_small_image(self, rng):
        with pytest.raises(ImageTooSmall):
            goldstein_filter(random_unit_field(rng, 16, 16), GoldsteinConfig(patch=32))

    def test_config_validation(self):
        with pytest.raises(InvalidValue):
            GoldsteinConfig(patch=30)
        with pytest.raises(InvalidValue):
            GoldsteinConfig(alpha=1.5)
        with pytest.raises(InvalidValue):
            GoldsteinConfig(overlap=32)
