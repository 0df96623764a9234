"""Collects the acceptance pass/fail lines and prints them in a dedicated
section at the end of the run (regular prints are eaten by capture)."""

acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)
