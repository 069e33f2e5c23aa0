import sys

import numpy as np
import pytest

from sdgrav import fixtures as fx
from sdgrav.calculus import Grid3


@pytest.fixture(scope="session")
def g8():
    return Grid3.cube(8)


@pytest.fixture(scope="session")
def g16():
    return Grid3.cube(16)


@pytest.fixture(scope="session")
def g32():
    return Grid3.cube(32)


@pytest.fixture(scope="session")
def rand16(g16):
    return fx.rand(g16, 0)


@pytest.fixture(scope="session")
def qs16(g16):
    return fx.qs(g16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
