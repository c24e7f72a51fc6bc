from __future__ import annotations

import pytest

_criterion_lines: list = []


@pytest.fixture
def criterion_report():
    """Collect one pass/fail line per acceptance criterion for the summary."""

    def record(line: str) -> None:
        _criterion_lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
