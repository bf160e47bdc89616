import sys


def pytest_terminal_summary(terminalreporter):
    lines = {}
    for mod in list(sys.modules.values()):
        found = getattr(mod, "ACCEPTANCE_LINES", None)
        if isinstance(found, dict):
            lines.update(found)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
