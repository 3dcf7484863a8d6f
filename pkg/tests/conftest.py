import pytest

# filled by the acceptance suite; echoed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance():
    def report(number, name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {name} ({detail})"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line
    return report
