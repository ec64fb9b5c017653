import pytest

_CRITERIA = {}


@pytest.fixture
def report():
    """Record the outcome of one acceptance criterion for the end-of-run summary."""

    def record(number, title, passed, detail=""):
        _CRITERIA[number] = (title, bool(passed), detail)
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({detail})"
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(
            f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({detail})")
