import numpy as np
import pytest

from radar_jde.posterior import DelayGrid
from radar_jde.signal_model import SystemConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def config():
    return SystemConfig()


@pytest.fixture
def grid(config):
    return DelayGrid.for_config(config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
