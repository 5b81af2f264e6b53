"""Shared pytest plumbing for the suite.

The acceptance tests accumulate one human-readable line per shipping
criterion; printing them from a terminal-summary hook keeps the lines
visible in a plain ``pytest -v`` run, where per-test stdout would be
swallowed by capture.
"""

import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
