from __future__ import annotations

import math

import pytest

from flyq.model import make_envelope
from flyq.numerics import TimeGrid

TWO_PI = 2 * math.pi
HALF = (1 / math.sqrt(2), 1 / math.sqrt(2))


@pytest.fixture(scope="session")
def exp_grid():
    return TimeGrid(0.0, 1.5, 4001)


@pytest.fixture(scope="session")
def gauss_grid():
    return TimeGrid(-0.75, 0.75, 4001)


@pytest.fixture(scope="session")
def delayed_grid():
    return TimeGrid(-0.75, 0.95, 4001)


@pytest.fixture(scope="session")
def exp_pair(exp_grid):
    return (
        make_envelope("exponential", exp_grid, gamma_c=TWO_PI * 15),
        make_envelope("exponential", exp_grid, gamma_c=TWO_PI * 5),
    )


@pytest.fixture(scope="session")
def gauss_pair(gauss_grid):
    return (
        make_envelope("gaussian", gauss_grid, omega=TWO_PI * 2),
        make_envelope("gaussian", gauss_grid, omega=TWO_PI * 4),
    )


@pytest.fixture(scope="session")
def delayed_pair(delayed_grid):
    return (
        make_envelope("gaussian", delayed_grid, omega=TWO_PI * 2),
        make_envelope("gaussian", delayed_grid, omega=TWO_PI * 2, t_center=0.2),
    )


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Print and keep one summary line per acceptance criterion."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
