import numpy as np
import pytest

from vortexlattice.lattice import TAU_TRIANGULAR, normalize_tau


@pytest.fixture(scope="session")
def shape_square():
    return normalize_tau(1j)[0]


@pytest.fixture(scope="session")
def shape_tri():
    return normalize_tau(complex(TAU_TRIANGULAR))[0]


@pytest.fixture(scope="session")
def shape_generic():
    return normalize_tau(0.3 + 1.2j)[0]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
