"""Shared pytest wiring: surface acceptance-criterion results."""
import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion after the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "CRITERION_LINES", None) if mod else None
    if lines:
        terminalreporter.ensure_newline()
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
