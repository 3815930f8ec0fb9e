import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_addoption(parser):
    parser.addoption("--extended", action="store_true", default=False, help="run slow high-gain checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--extended"):
        return
    skip = pytest.mark.skip(reason="extended check; pass --extended to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        if report.skipped and not detail:
            detail = "extended check; pass --extended to run"
        _ACCEPTANCE.append((name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    def order(entry):
        m = re.match(r"test_ac(\d+)", entry[0])
        return (int(m.group(1)) if m else 99, entry[0])

    for name, status, detail in sorted(_ACCEPTANCE, key=order):
        terminalreporter.write_line(f"{status:4s} {name}: {detail}")
