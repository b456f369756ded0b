import mpmath
import numpy as np
import pytest

from specbound import ambient as amb
from specbound.quadrature import make_grid

mpmath.mp.dps = 30


def mp(x) -> float:
    return float(x)


@pytest.fixture(scope="session")
def grid3():
    return make_grid(3)


@pytest.fixture(scope="session")
def grid4():
    return make_grid(4)


@pytest.fixture(scope="session")
def r3():
    return amb.Constant(3, 0.0)


@pytest.fixture(scope="session")
def h3():
    return amb.Constant(3, -1.0)


@pytest.fixture(scope="session")
def s3():
    return amb.Constant(3, 1.0)


@pytest.fixture(scope="session")
def ch2():
    return amb.Rank1(2, 2)


# certified warped ambients (parameters frozen after a numeric search)
WARP_NONNEG = dict(family="PERTURBED_SIN", r_max=0.7, delta=1.0, eps=0.05, m=2)
WARP_NONPOS = dict(family="PERTURBED_SIN", r_max=1.0, delta=1.0, eps=0.5, m=2)


@pytest.fixture(scope="session")
def warped_nonneg():
    return amb.Warped(3, amb.WarpSpec(**WARP_NONNEG),
                      amb.CurvatureClass("NONNEG_PINCHED", 1.0))


@pytest.fixture(scope="session")
def warped_nonpos():
    return amb.Warped(3, amb.WarpSpec(**WARP_NONPOS), amb.CurvatureClass("NONPOS"))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(1234))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture
def verdict_line():
    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
