import numpy as np
import pytest

from qsdual import DualMap, ModelParams, build_grid


@pytest.fixture(scope="session")
def dual():
    return DualMap()


@pytest.fixture(scope="session")
def params_2d():
    return ModelParams(N=4, m=2, p=3.0, lam=10.0)


@pytest.fixture(scope="session")
def grid_2d(params_2d):
    return build_grid(params_2d, 8.0, 48)


@pytest.fixture(scope="session")
def params_3d():
    return ModelParams(N=6, m=2, p=3.0, lam=10.0)


@pytest.fixture(scope="session")
def grid_3d(params_3d):
    return build_grid(params_3d, 8.0, 24)


def random_smooth_values(grid, seed, n_bumps=3, amp=0.6):
    """Seeded sum of interior Gaussian bumps, decayed well before the wall."""
    rng = np.random.default_rng(seed)
    vals = grid.zero_values()
    for _ in range(n_bumps):
        centers = rng.uniform(0.1 * grid.L, 0.5 * grid.L, size=grid.active_axes)
        width = rng.uniform(0.06 * grid.L, 0.12 * grid.L)
        a = rng.uniform(-amp, amp)
        sq = np.zeros(grid.shape)
        for ax in range(grid.active_axes):
            sq = sq + (grid.coord(ax) - centers[ax]) ** 2
        vals += a * np.exp(-sq / (2.0 * width * width))
    return vals
