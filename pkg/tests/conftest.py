import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None or rep.when != "call":
        return
    n, title = crit.args
    detail = getattr(item, "acceptance_detail", "")
    _ACCEPTANCE[n] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[n]
        line = f"criterion {n:2d} [{verdict}] {title}"
        terminalreporter.write_line(line + (f": {detail}" if detail else ""))
