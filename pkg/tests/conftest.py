import numpy as np
import pytest

from svv.approx import bernstein_fit, ou_discretize
from svv.kernels import make_fractional_kernel, make_power_kernel
from svv.market import MarketSpec
from svv.noise import uniform_grid
from svv.volatility import paper_sandwich

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def holder_kernel():
    return make_power_kernel(0.4)


@pytest.fixture(scope="session")
def rough_kernel():
    return make_fractional_kernel(0.3)


@pytest.fixture(scope="session")
def holder_market(holder_kernel):
    return MarketSpec(5.0, 0.5, paper_sandwich(), holder_kernel, bernstein_fit(holder_kernel, 10))


@pytest.fixture(scope="session")
def rough_market(rough_kernel):
    return MarketSpec(5.0, 0.5, paper_sandwich(), rough_kernel, ou_discretize(0.3, 10))


@pytest.fixture(scope="session")
def grid100():
    return uniform_grid(1.0, 100)
