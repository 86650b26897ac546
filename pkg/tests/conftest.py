import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tenseg.topology import generate_dbar, generate_lander, generate_prism  # noqa: E402


@pytest.fixture(scope="session")
def dbar():
    return generate_dbar()


@pytest.fixture(scope="session")
def prism():
    return generate_prism()


@pytest.fixture(scope="session")
def lander():
    return generate_lander()


@pytest.fixture(scope="session")
def benchmarks(dbar, prism, lander):
    return {"dbar": dbar, "prism": prism, "lander": lander}


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
