from __future__ import annotations

import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def report(request):
    """Append one line to the acceptance summary printed after the run."""
    lines = request.config.stash.setdefault(_LINES, [])

    def add(line: str) -> None:
        lines.append(line)
        print(line)

    return add


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
