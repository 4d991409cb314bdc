"""Shared fixtures and the PASS/FAIL summary for acceptance criteria."""

from __future__ import annotations

import pytest

_acceptance: dict[str, list[str]] = {}
_notes: dict[str, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): one named acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    name = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance.setdefault(name, []).append(report.outcome)


@pytest.fixture
def note(request):
    """Attach a short measured detail to this test's acceptance line."""
    marker = request.node.get_closest_marker("acceptance")
    name = marker.args[0] if marker else request.node.name
    return lambda text: _notes.setdefault(name, []).append(text)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcomes in _acceptance.items():
        status = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        detail = "; ".join(_notes.get(name, []))
        terminalreporter.write_line(f"{status}  {name}" + (f"  ({detail})" if detail else ""))
