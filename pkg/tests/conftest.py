import numpy as np
import pytest

from schottky_lax import cli
from schottky_lax.liealg import gl, sl
from schottky_lax.moebius import SchottkyData, loxodromic
from schottky_lax.phasespace import random_point
from schottky_lax.poincare import TruncationPolicy


@pytest.fixture(scope="session")
def genus1():
    return cli.load_config(str(cli.reference_path("genus1")))


@pytest.fixture(scope="session")
def genus2():
    return cli.load_config(str(cli.reference_path("genus2")))


@pytest.fixture(scope="session")
def small():
    """A cheap genus-1 gl(2) setup for unit tests."""
    s = SchottkyData.from_generators([loxodromic(1, -1, 0.16)])
    p = random_point(gl(2), 1, np.random.default_rng(3), g_scale=0.1)
    return s, p, TruncationPolicy(target_tail=1e-12)


@pytest.fixture(scope="session")
def small2():
    """A cheap genus-2 sl(2) setup at short fixed truncation."""
    s = SchottkyData.from_generators([loxodromic(1, -1, 0.1), loxodromic(1 + 8j, -1 + 8j, 0.1)])
    p = random_point(sl(2), 2, np.random.default_rng(5), g_scale=0.05)
    return s, p, TruncationPolicy().fixed(4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
