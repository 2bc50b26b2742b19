import pytest

from supercrit.constants import derive_exponents
from supercrit.fowler import ground_state, shoot_direct
from supercrit.linop import LinearSolver, WeightedNormConfig
from supercrit.radialgrid import default_grid


@pytest.fixture(scope="session")
def e63():
    return derive_exponents(6, 3)


@pytest.fixture(scope="session")
def e622():
    return derive_exponents(6, 2.2)


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def gs63(e63, grid):
    return ground_state(e63, grid)


@pytest.fixture(scope="session")
def gs622(e622, grid):
    return ground_state(e622, grid)


@pytest.fixture(scope="session")
def shot63(e63):
    return shoot_direct(e63)


@pytest.fixture(scope="session")
def cfg63(e63):
    return WeightedNormConfig.for_exponents(e63)


@pytest.fixture(scope="session")
def solver63(gs63, cfg63):
    return LinearSolver(gs63, cfg63)


_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """criterion(number, ok, detail) records one pass/fail line for the summary."""
    lines = request.config.stash[_LINES]

    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
