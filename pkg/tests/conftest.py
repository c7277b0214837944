"""Shared test plumbing: the acceptance-criteria reporter.

Acceptance tests register one line per criterion through the ``criteria``
fixture; the lines are echoed in a dedicated section of the terminal
summary so every criterion shows a PASS/FAIL verdict even under output
capture.
"""

import pytest


class CriterionLog:
    def __init__(self):
        self.lines: list[tuple[str, str]] = []

    def record(self, number: str, name: str, ok: bool, detail: str = "") -> bool:
        status = "PASS" if ok else "FAIL"
        line = f"{status} criterion {number}: {name}"
        if detail:
            line += f" [{detail}]"
        self.lines.append((number, line))
        print(line)
        return ok


_LOG = CriterionLog()


def pytest_configure(config):
    config._criterion_log = _LOG


@pytest.fixture(scope="session")
def criteria():
    return _LOG


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_criterion_log", None)
    if log and log.lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(log.lines):
            terminalreporter.write_line(line)
