from __future__ import annotations

import pytest

from fuzzysphere import minimize_closed

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def model():
    return minimize_closed()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
