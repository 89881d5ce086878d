import pytest

ACCEPTANCE = {}


@pytest.fixture
def accept():
    """Record one acceptance line: ``accept(number, title, ok, detail, seconds)``."""

    def record(number, title, ok, detail, seconds):
        mark = "PASS" if ok else "FAIL"
        line = f"[{mark}] criterion {number:2d} {title}: {detail} ({seconds:.1f} s)"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
