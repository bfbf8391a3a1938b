import numpy as np
import pytest

from reflectsde import make_coefficients, make_fine_grid, sample_brownian

SEED = 20260801


@pytest.fixture(scope="session")
def grid_1k():
    return make_fine_grid(2**10)


@pytest.fixture(scope="session")
def grid_4k():
    return make_fine_grid(2**12)


@pytest.fixture(scope="session")
def sine():
    return make_coefficients("sin")


@pytest.fixture(scope="session")
def linear():
    return make_coefficients("linear")


@pytest.fixture(scope="session")
def unit_const():
    return make_coefficients("constant", 1.0)


def brownian(grid, path_index=0, seed=SEED):
    return sample_brownian(seed, path_index, grid)


@pytest.fixture
def bpath(grid_1k):
    return brownian(grid_1k)


def assert_rates(xs, ys, lo, hi=None):
    slope = np.polyfit(np.log(xs), np.log(ys), 1)[0]
    assert slope >= lo, f"slope {slope:.3f} below {lo}"
    if hi is not None:
        assert slope <= hi, f"slope {slope:.3f} above {hi}"
    return slope
