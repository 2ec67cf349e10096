import warnings

import pytest

from agpkit.polyapprox import ConditioningWarning

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True)
def _quiet_conditioning():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditioningWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
