import pytest

_LINES = {}


@pytest.fixture
def criterion():
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def record(num, ok, detail):
        line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}: {detail}"
        _LINES[num] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(_LINES):
            terminalreporter.write_line(_LINES[num])
