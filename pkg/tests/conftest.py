import numpy as np
import pytest

from bsr.operators import OperatorSet, benchmark_operators, default_operators
from bsr.prior import PriorConfig
from bsr.tree import NonTerminal, Terminal
from bsr.operators import get_operator


def op(name):
    return get_operator(name)


def node(name, *children, params=None):
    return NonTerminal(op(name), tuple(children), params)


def x(i):
    """Terminal for 1-based feature ``i``."""
    return Terminal(i - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def prior2():
    return PriorConfig(operators=default_operators()).with_features(2)


@pytest.fixture
def bench_prior2():
    return PriorConfig(operators=benchmark_operators()).with_features(2)


@pytest.fixture
def small_pool_prior():
    """Three operators of mixed arity, two features, lt included."""
    return PriorConfig(alpha=0.5, beta=1.0, operators=OperatorSet(["add", "exp", "lt"])).with_features(2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
