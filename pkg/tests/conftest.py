import numpy as np
import pytest

from evosurf import make_icosphere


@pytest.fixture(scope="session")
def sphere0():
    return make_icosphere(0, 3)


@pytest.fixture(scope="session")
def sphere1():
    return make_icosphere(1, 3)


@pytest.fixture(scope="session")
def sphere2():
    return make_icosphere(2, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for the acceptance summary."""

    def add(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
