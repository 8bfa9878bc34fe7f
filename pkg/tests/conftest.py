import pytest

from flatcore.grid import Ball, build_grid
from flatcore.radial import flat_profile
from flatcore.scalar_core import Exponents

STABLE = Exponents(0.05, 0.1, 3)


@pytest.fixture(scope="session")
def exp3():
    return STABLE


@pytest.fixture(scope="session")
def flat3():
    return flat_profile(STABLE)


@pytest.fixture(scope="session")
def ball16():
    return build_grid(Ball((0.0, 0.0, 0.0), 1.0), 1 / 16, mirror=(0, 1, 2))


@pytest.fixture(scope="session")
def ball8():
    return build_grid(Ball((0.0, 0.0, 0.0), 1.0), 1 / 8, mirror=(0, 1, 2))


# ---------------------------------------------------------------- acceptance log

def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def record_criterion(request):
    """Store (part, passed, detail) for a numbered criterion and echo it."""
    def record(number, part, passed, detail=""):
        request.config._criteria.setdefault(number, []).append((part, bool(passed), detail))
        print(f"criterion {number} [{part}]: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(crit):
        parts = crit[number]
        ok = all(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}")
        for part, passed, detail in parts:
            terminalreporter.write_line(f"    {part}: {'pass' if passed else 'fail'}  {detail}")
