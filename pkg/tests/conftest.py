import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tqdiff.phys import BathParams, OscillatorParams

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def unit_bath():
    return BathParams()


@pytest.fixture
def unit_oscillator():
    return OscillatorParams(BathParams(), 1.0)


def rel(a, b):
    return np.abs(np.asarray(a) / np.asarray(b) - 1.0)
