import pytest

_LINES = []


@pytest.fixture(scope="session")
def report():
    """Record one verdict line per acceptance criterion."""

    def add(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        _LINES.append(line)
        print(line)
        return ok

    return add


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
