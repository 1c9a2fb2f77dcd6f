"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import re

ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or report.outcome != "passed":
        if report.when == "call" or key not in ACCEPTANCE:
            ACCEPTANCE[key] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), outcome in sorted(ACCEPTANCE.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {verdict}  {name.replace('_', ' ')}")
