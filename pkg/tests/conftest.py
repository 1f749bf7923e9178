"""Shared fixtures and the acceptance-summary terminal hook.

Tests marked ``@pytest.mark.acceptance("<criterion>")`` get one PASS/FAIL
line each at the end of the run, so the acceptance status is readable at a
glance without scanning the full test listing.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_acceptance_results: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(criterion): marks a test as one acceptance criterion check",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    criterion = marker.args[0] if marker.args else item.name
    if report.when == "call":
        _acceptance_results[item.nodeid] = (
            "PASS" if report.passed else "FAIL",
            criterion,
        )
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_results[item.nodeid] = (
            "SKIP" if report.skipped else "ERROR",
            criterion,
        )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid in sorted(_acceptance_results):
        status, criterion = _acceptance_results[nodeid]
        terminalreporter.write_line(f"[{status}] {criterion}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
