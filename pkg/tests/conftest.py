ACCEPTANCE_LINES: list[str] = []


def _order(line):
    label = line.split()[1].rstrip(":")
    digits = label.rstrip("abcdefgh")
    return int(digits), label[len(digits):]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_order):
            terminalreporter.write_line(line)
