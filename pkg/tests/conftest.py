import time

import pytest
from hypothesis import settings

from qsedyn.config import DEFAULT_GRID, parse_grid
from qsedyn.pipeline import prepare_point, prepare_points, run_scan

settings.register_profile("qsedyn", deadline=None, max_examples=50)
settings.load_profile("qsedyn")

ACCEPTANCE_LINES = {}
TIMINGS = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def point_08():
    return prepare_point(0.8)


@pytest.fixture(scope="session")
def point_064():
    return prepare_point(0.64)


@pytest.fixture(scope="session")
def scan_points():
    start = time.perf_counter()
    points = prepare_points(parse_grid(DEFAULT_GRID))
    TIMINGS["prepare"] = time.perf_counter() - start
    return points


@pytest.fixture(scope="session")
def scan(scan_points):
    start = time.perf_counter()
    result = run_scan(parse_grid(DEFAULT_GRID), points=scan_points)
    TIMINGS["track"] = time.perf_counter() - start
    return result
