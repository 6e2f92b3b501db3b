import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from beqt.spectral import SpectralGrid
from beqt.tensor_core import ModelParams

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture
def grid32():
    return SpectralGrid(32)


@pytest.fixture
def grid64():
    return SpectralGrid(64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def params():
    return ModelParams()


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one ``ACn PASS|FAIL ...`` line; lines are echoed in the terminal summary."""

    def record(name: str, passed: bool, detail: str):
        line = f"{name} {'PASS' if passed else 'FAIL'} {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
