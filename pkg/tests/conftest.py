import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


# nodeid -> [number, title, outcome] for tests marked with @pytest.mark.criterion
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _CRITERIA[item.nodeid] = [number, title, "NOT RUN"]


def pytest_runtest_logreport(report):
    entry = _CRITERIA.get(report.nodeid)
    if entry is None:
        return
    if report.when == "call":
        entry[2] = "PASS" if report.passed else "FAIL"
    elif report.failed:
        entry[2] = "FAIL"
    elif report.skipped and entry[2] == "NOT RUN":
        entry[2] = "SKIP"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = sorted(_CRITERIA.values())
    if not entries:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, outcome in entries:
        terminalreporter.write_line(f"criterion {number:2d}  {outcome:4s}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
