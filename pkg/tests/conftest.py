import numpy as np
import pytest

from slipwave import Grid, PhysicalParams


@pytest.fixture
def small_grid():
    return Grid(L=10.0, d=1, N_x=32, N_z=24, b=1.0)


@pytest.fixture
def small_grid_2d():
    return Grid(L=8.0, d=2, N_x=12, N_z=16, b=1.0)


@pytest.fixture
def params():
    return PhysicalParams(b=1.0, sigma=0.1, gamma=1.0, alpha=0.1,
                          beta=np.eye(2))


@pytest.fixture
def params_2d():
    return PhysicalParams(b=1.0, sigma=0.1, gamma=1.0, alpha=0.1,
                          beta=np.eye(3))
