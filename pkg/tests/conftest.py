import math

import pytest

from resonant_search.model import build_rotor_spectrum, build_search_problem

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def rotor50():
    """The default N = 50 rotor problem (subset 1..50, j = 51, s = 7)."""
    return build_search_problem(build_rotor_spectrum(51), range(1, 51), 51, 7)


@pytest.fixture(scope="session")
def omega50():
    return 1.0 / math.sqrt(50)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
