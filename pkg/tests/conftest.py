import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from meteorflow import _kernels  # noqa: E402

BACKENDS = sorted(_kernels.available_backends())


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Run the test once per importable kernel backend."""
    previous = _kernels.BACKEND
    _kernels.use(request.param)
    yield request.param
    _kernels.use(previous)


_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = report.nodeid.split("::")[-1]
        note = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            note = report.longrepr[2]
        else:
            # the measured values are printed by the test itself
            lines = [ln for ln in report.capstdout.splitlines() if ln.startswith(("PASS ", "FAIL "))]
            if lines:
                note = lines[-1].split(": ", 1)[-1]
        _acceptance.append((label, report.outcome.upper(), note))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, note in _acceptance:
        line = f"{outcome:<7} {label}"
        if note:
            line += f"  ({note})"
        terminalreporter.write_line(line)
