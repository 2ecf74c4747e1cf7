"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

from collections import OrderedDict

import pytest

_RESULTS = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion this check belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        entry = _RESULTS.setdefault(number, {"title": title, "checks": []})
        entry["checks"].append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        checks = entry["checks"]
        failed = [name for name, ok in checks if not ok]
        status = "PASS" if not failed else "FAIL"
        tr.write_line(f"criterion {number}: {status}  {entry['title']}  ({len(checks) - len(failed)}/{len(checks)} checks)")
        for name in failed:
            tr.write_line(f"    failed: {name}")
