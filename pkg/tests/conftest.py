"""Shared pytest hooks: print one PASS/FAIL line per acceptance criterion."""

import pytest

_acceptance_results = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): a named acceptance criterion"
    )


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance" not in report.nodeid:
        return
    _acceptance_results.append(
        (report.nodeid.split("::")[-1], report.outcome.upper(), report.duration)
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    tw = terminalreporter
    tw.section("acceptance criteria")
    for name, outcome, duration in _acceptance_results:
        word = "PASS" if outcome == "PASSED" else outcome
        tw.write_line(f"ACCEPTANCE {name}: {word} ({duration:.1f}s)")
