import warnings

import numpy as np
import pytest

from coulomb_lab.equilibrium import solve_equilibrium
from coulomb_lab.potential import Quadratic

warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture(scope="session")
def eq2():
    return solve_equilibrium(Quadratic(0.5, 2))


@pytest.fixture(scope="session")
def eq3():
    return solve_equilibrium(Quadratic(0.5, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
