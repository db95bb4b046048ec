import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale R-ladder runs (minutes)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def lebesgue_ball_3():
    from tools.fractal_measures import make_lebesgue_ball
    return make_lebesgue_ball(n=3, resolution=1 / 8)


@pytest.fixture(scope="session")
def radial_alpha2_n3():
    from tools.fractal_measures import make_radial_power
    return make_radial_power(alpha=2, n=3, resolution=1 / 8)
