import numpy as np
import pytest

from phasekit.grid import ComplexField, PhaseImage, phase_to_phasor, wrap


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_phase_image(rng, height, width) -> PhaseImage:
    data = wrap(rng.uniform(-np.pi, np.pi, (height, width)))
    return PhaseImage(data.astype(np.float32))


def random_unit_field(rng, height, width) -> ComplexField:
    return phase_to_phasor(random_phase_image(rng, height, width))


def circular_diff(a, b):
    """Wrapped absolute difference between two phase arrays (float64)."""
    return np.abs(wrap(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))
