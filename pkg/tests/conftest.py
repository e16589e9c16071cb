import pytest

_RESULTS = []


class CriterionLog:
    """Collects one line per acceptance criterion for the terminal summary."""

    def __init__(self, number, title):
        self.number = number
        self.title = title

    def check(self, ok, detail):
        line = f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'}: {self.title} | {detail}"
        _RESULTS.append((self.number, line))
        print(line)
        assert ok, line


@pytest.fixture
def criterion():
    return CriterionLog


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_RESULTS):
        terminalreporter.write_line(line)
