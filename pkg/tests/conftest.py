import numpy as np
import pytest

from carlemanqr import DiffusionField, Grid


@pytest.fixture
def grid21():
    return Grid(n=21)


@pytest.fixture
def grid31():
    return Grid(n=31)


@pytest.fixture
def ident21(grid21):
    return DiffusionField.identity(grid21)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
