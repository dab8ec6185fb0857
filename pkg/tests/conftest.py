import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance outcome; the line is printed and repeated in the summary."""

    def record(num, title, ok, detail=""):
        line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE[num] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(str(k).rstrip("b")), str(k))):
        terminalreporter.write_line(_ACCEPTANCE[key])
