import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dyadiclab import invariant_region as ir

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def eps_star():
    """Admissible eps for the default region (searched once per session)."""
    return ir.find_epsilon().eps_star


@pytest.fixture(scope="session")
def eps_half(eps_star):
    return 0.5 * eps_star


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LINES
    except ImportError:
        return
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
