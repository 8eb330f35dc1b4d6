import pytest

from sepsplit.numeric import working_precision

_acceptance_lines = []


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""
    def add(name, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        _acceptance_lines.append(line)
        print(line)
        return passed
    return add


@pytest.fixture(autouse=True)
def _precision():
    with working_precision(128):
        yield


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
