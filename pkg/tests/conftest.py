import numpy as np
import pytest

from kacx.equilibrium import exp_density, f_alpha


@pytest.fixture(scope="session")
def fa1():
    return f_alpha(1.0)


@pytest.fixture(scope="session")
def ge():
    return exp_density()


@pytest.fixture()
def rng():
    # function-scoped: every test sees the same fresh stream regardless of
    # which other tests ran
    return np.random.default_rng(20240817)
