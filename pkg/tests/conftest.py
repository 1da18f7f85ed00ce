import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE = {}


def record(number, ok, detail):
    """Store and print one acceptance line; returns ``ok``."""
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE[number] = line
    sys.__stdout__.write("\n" + line + "\n")
    sys.__stdout__.flush()
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
