import numpy as np
import pytest

from semicomplete.data import hare_data
from semicomplete.integrate import gauss_hermite_rule


@pytest.fixture(scope="session")
def hare():
    return hare_data()


@pytest.fixture(scope="session")
def rule100():
    return gauss_hermite_rule(100)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one pass/fail line per acceptance criterion for the terminal summary."""
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
