import numpy as np
import pytest

from openulam import IntervalSet, OpenSystem
from openulam._jit import HAVE_NUMBA
from openulam.maps import beta_shift, doubling, tripling

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
MARKOV_HOLE = 5 / 5.9


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def middle_third():
    return OpenSystem(tripling(), IntervalSet([(1 / 3, 2 / 3)]))


@pytest.fixture
def beta_markov():
    return OpenSystem(beta_shift(5.9), IntervalSet([(MARKOV_HOLE, 1.0)]))


@pytest.fixture
def beta_nonmarkov():
    return OpenSystem(beta_shift(5.9), IntervalSet([(0.9001, 1.0)]))


@pytest.fixture
def closed_doubling():
    return OpenSystem(doubling())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, echoed in the terminal summary.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
