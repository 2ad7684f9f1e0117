import pytest

# Acceptance tests append "(criterion, passed, detail)" here; the summary
# hook prints one line per criterion at the end of the run.
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail):
        ACCEPTANCE_LINES.append((criterion, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda x: x[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")
