import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import probsess  # noqa: E402

PROGRAMS = Path(probsess.__file__).parent / "programs"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def program_text():
    def read(name: str) -> str:
        return (PROGRAMS / f"{name}.ps").read_text()

    return read


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
