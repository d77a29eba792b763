import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    line = dict(report.user_properties).get("verdict")
    if report.when == "call" or (report.failed and report.nodeid not in _ACCEPTANCE):
        if line is None:
            line = f"FAIL {report.nodeid.split('::')[-1]}: {report.outcome} before a verdict was reached"
        _ACCEPTANCE[report.nodeid] = line


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE.values():
        terminalreporter.write_line(line)
