import numpy as np
import pytest

from rotcap.grid import Grid


@pytest.fixture(scope="session")
def grid1d():
    return Grid(256)


@pytest.fixture(scope="session")
def grid2d():
    return Grid(64, 64)


@pytest.fixture(scope="session")
def grid3d():
    return Grid(32, 32, 8)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
