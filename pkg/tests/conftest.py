import numpy as np
import pytest

from zklab.spectral import make_grid


@pytest.fixture
def grid1d():
    return make_grid(1, 40.0, 128)


@pytest.fixture
def grid2d():
    return make_grid(2, 40.0, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
