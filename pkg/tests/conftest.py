import numpy as np
import pytest

from thrustwalk.model import RobotParams
from thrustwalk.sim import SimConfig, simulate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def params():
    return RobotParams()


@pytest.fixture(scope="session")
def nominal_config():
    return SimConfig(duration=10.0)


@pytest.fixture(scope="session")
def nominal_log(nominal_config):
    """The 10 s nominal run, shared by the simulation and acceptance tests."""
    return simulate(nominal_config)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
