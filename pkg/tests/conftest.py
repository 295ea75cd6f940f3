import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("nlslab", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("nlslab")

ORACLE_PATH = Path(__file__).parent / "oracles" / "values.json"


@pytest.fixture(scope="session")
def oracle():
    return json.loads(ORACLE_PATH.read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian(grid, amp=1.0, width=1.0):
    from nlslab.grid import field_from_function
    return field_from_function(grid, lambda *x: amp * np.exp(-sum(xi * xi for xi in x) / (2 * width**2)))


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
