import math
import sys

import numpy as np
import pytest

from autogcas.config import DEFAULT_SCHEDULE, SimConfig, default_config
from autogcas.gcas import EcbfGains, GainSchedule


@pytest.fixture(scope="session")
def cfg() -> SimConfig:
    return default_config()


@pytest.fixture(scope="session")
def aircraft(cfg):
    return cfg.aircraft


@pytest.fixture(scope="session")
def schedule() -> GainSchedule:
    if not DEFAULT_SCHEDULE.exists():
        pytest.skip("shipped gain schedule not generated yet")
    return GainSchedule.load(DEFAULT_SCHEDULE)


@pytest.fixture
def constant_schedule():
    return GainSchedule.constant(EcbfGains.from_k1(0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def deg(x):
    return math.radians(x)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
