import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record a one-line PASS/FAIL summary for an acceptance criterion."""
    def record(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {name}: {detail}"
        _VERDICTS.append((number, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
