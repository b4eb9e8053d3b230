"""Collects acceptance results and prints one line per criterion."""

import pytest

_RESULTS: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _RESULTS.setdefault(number, {"title": title, "passed": True, "detail": ""})
    if report.failed:
        entry["passed"] = False
    if report.when == "call":
        details = [str(v) for k, v in item.user_properties if k == "detail"]
        if report.failed:
            details.append(str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else "failed")
        entry["detail"] = "; ".join(details)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        status = "PASS" if e["passed"] else "FAIL"
        line = f"[{status}] {number}. {e['title']}"
        if e["detail"]:
            line += f" | {e['detail']}"
        tr.write_line(line, green=e["passed"], red=not e["passed"])
