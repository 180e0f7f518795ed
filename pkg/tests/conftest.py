import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from higgsforms.scalar import ChartSpec

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("default")


@pytest.fixture
def chart1():
    return ChartSpec(1, ("z1",), ("cp1",))


@pytest.fixture
def chart2():
    return ChartSpec(2, ("z1", "z2"), ("torus", "torus"))


@pytest.fixture
def chart3():
    return ChartSpec(3, ("z1", "z2", "z3"), ("torus",) * 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line per acceptance criterion."""

    def emit(line):
        print(line)
        _ACCEPTANCE_LINES.append(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
