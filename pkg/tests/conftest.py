import math

import pytest

from invlab import TimeGrid, make_flat_pi, make_optimal_noise, make_transitionless

# transitionless example parameters used throughout (Omega0*T, delta0*T)
EX_OMEGA0 = (5.57 / 4.3) * math.pi
EX_DELTA0 = (5.57 / 4.3) ** 2 * math.pi


@pytest.fixture(scope="session")
def grid():
    return TimeGrid(2001)


@pytest.fixture(scope="session")
def flat_field(grid):
    return make_flat_pi(0.0, grid)


@pytest.fixture(scope="session")
def transitionless_example(grid):
    return make_transitionless(EX_OMEGA0, EX_DELTA0, grid)


@pytest.fixture(scope="session")
def optimal_noise_field(grid):
    return make_optimal_noise(7, grid)
