import pytest

from biharmlab.analysis.threshold import lambda0_search
from biharmlab.grid import build_grid, make_quadrature
from biharmlab.params import OperatorParams


@pytest.fixture(scope="session")
def quad9():
    return make_quadrature(build_grid(), 9)


@pytest.fixture(scope="session")
def params9():
    p = OperatorParams(9, 1.0, 2.0)
    lam0 = lambda0_search(p).value
    return p.with_lambda0(lam0).with_lambda(lam0)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance gates (slow)")
