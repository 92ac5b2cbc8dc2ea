import numpy as np
import pytest

from guidewave.discretize import DampingProfile, Grid1D


@pytest.fixture
def grid40():
    return Grid1D(X=40.0, N=512)


@pytest.fixture
def damping_const(grid40):
    return DampingProfile.build(grid40, "constant", level=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
