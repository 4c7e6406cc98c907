import pytest

from originsim.fixtures import fixture_dataset, toy_two_route_dataset
from originsim.grids import GridSpec
from originsim.surface import CovarianceParams


@pytest.fixture(scope="session")
def data():
    return fixture_dataset()


@pytest.fixture(scope="session")
def toy_quiet():
    return toy_two_route_dataset(conflict_on_short=False)


@pytest.fixture(scope="session")
def toy_conflict():
    return toy_two_route_dataset(conflict_on_short=True)


@pytest.fixture
def cov():
    return CovarianceParams(nu=1.5, inv_range=0.2, sill=1.0, nugget=0.0)


@pytest.fixture
def small_grid():
    return GridSpec(x_min=-20.0, x_max=20.0, y_min=-15.0, y_max=15.0,
                    nx=40, ny=30)
