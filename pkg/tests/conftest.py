"""Shared test plumbing: the acceptance suite's end-of-run report."""

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Recorder for one acceptance check; lines surface after the run."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
