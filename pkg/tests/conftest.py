import pytest

_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line, then fail the test on FAIL."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
