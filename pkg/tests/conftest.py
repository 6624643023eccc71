import pytest

from wsndetect.config import hexagon7_partition

_ACCEPTANCE_LINES = []


def record_criterion(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="session")
def hex_boolean():
    return hexagon7_partition("boolean", 0.01)


@pytest.fixture(scope="session")
def hex_pathloss():
    return hexagon7_partition("powerlaw", 0.01)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
