from test_acceptance import CRITERIA_LINES


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERIA_LINES):
        terminalreporter.write_line(line)
