"""Shared pytest plumbing.

The acceptance tests (tests/test_acceptance.py) each stand for one
release criterion; after the run we print one PASS/FAIL line per
criterion so the gate is readable at a glance.
"""

import re

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call":
        _acceptance_results[name] = report.outcome
    elif report.when == "setup" and report.outcome != "passed":
        _acceptance_results[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in sorted(_acceptance_results):
        m = re.match(r"test_criterion_(\d+)_(\w+)", name)
        if not m:
            continue
        num = int(m.group(1))
        title = m.group(2).replace("_", " ")
        outcome = _acceptance_results[name]
        verdict = "PASS" if outcome == "passed" else outcome.upper()
        tr.write_line(f"ACCEPTANCE {num:2d} [{verdict}] {title}")
