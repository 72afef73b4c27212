import functools

import pytest
from hypothesis import HealthCheck, settings

from canalqc.fixtures import corrupted_b, demo_spec
from canalqc.qclab import analyze_grid

settings.register_profile(
    "canalqc",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("canalqc")


@functools.lru_cache(maxsize=None)
def analyzed(name, corrupted=False):
    """Grid analysis of a built-in demo at resolution 3, shared across test modules."""
    return analyze_grid(demo_spec(name), 3, b_override=corrupted_b if corrupted else None)


@pytest.fixture(scope="session")
def grid_of():
    return analyzed


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
