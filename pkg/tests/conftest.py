import math

import numpy as np
import pytest

from bkchain import ChainSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_common_phase_spec(rng, n_sites=None, periodic=None):
    """Random zero-detuning chain with a common interaction phase."""
    n = int(rng.integers(2, 7)) if n_sites is None else n_sites
    phi = float(rng.uniform(0.0, 2.0 * math.pi))
    mj = float(rng.uniform(0.0, 2.0))
    ml = float(rng.uniform(0.05, 2.0))
    gamma = float(rng.uniform(0.1, 3.0))
    per = bool(rng.integers(0, 2)) if periodic is None else periodic
    return ChainSpec.common_phase(n, mj, ml, phi, gamma,
                                  boundary="periodic" if per else "open")
