import math

import numpy as np
import pytest

from dynelim import PulseSpec, Scheme, SystemParams, modulation_for_effective_area, propagate

TWO_PI = 2.0 * math.pi


def de_spec(area_pi=10.0, seff_pi=1.0, **kwargs):
    """Modulated-scheme spec with the modulation frequency set by the area rule."""
    area = area_pi * math.pi
    omega_e = kwargs.pop("omega_e", None)
    if omega_e is None:
        omega_e = modulation_for_effective_area(area, seff_pi * math.pi, 1.0)
    return PulseSpec(scheme=Scheme.DE, area=area, omega_e=omega_e, **kwargs)


@pytest.fixture(scope="session")
def full_transfer_trajectory():
    """The showcase pulse: S = 10 pi with unit effective area, resonant."""
    spec = de_spec(10.0, 1.0)
    params = SystemParams(pulse=spec)
    return propagate(params, -spec.window, spec.window, n_samples=513)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_hermitian(rng, scale=1.0):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    return scale * (m + m.conj().T) / 2.0
