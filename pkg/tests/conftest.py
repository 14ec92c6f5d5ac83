import math

import pytest

from pulsedtls import SystemParams, make_pulse

PI = math.pi

ACCEPTANCE_LINES = []


def record_criterion(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sys1():
    return SystemParams(gamma=1.0)


@pytest.fixture(scope="session")
def square_pi_short():
    return make_pulse("square", PI, 1e-3)


@pytest.fixture(scope="session")
def square_2pi_short():
    return make_pulse("square", 2 * PI, 1e-3)
