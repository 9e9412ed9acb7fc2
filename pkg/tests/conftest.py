import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_LINES: dict = {}


@pytest.fixture
def acceptance_line():
    """Record (and print) the one-line verdict of an acceptance criterion."""

    def record(number: int, ok: bool, text: str):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        _LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_LINES):
            terminalreporter.write_line(_LINES[number])
