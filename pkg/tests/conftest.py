import numpy as np
import pytest

from modules.grid import PixelGrid


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long randomized loops (run by default)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid10():
    return PixelGrid(10, 10)
