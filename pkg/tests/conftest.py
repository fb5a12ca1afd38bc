import pytest

_CRITERIA = []


@pytest.fixture
def criterion():
    """``criterion(name, ok, detail)`` records one acceptance line and prints it."""

    def record(name, ok, detail=""):
        line = f"{name}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
