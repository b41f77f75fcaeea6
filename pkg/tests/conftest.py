import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the per-criterion verdict lines collected by test_acceptance."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
