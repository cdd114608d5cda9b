import pytest

CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def criteria_log():
    return CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number])
