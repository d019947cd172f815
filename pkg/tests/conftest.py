import re
from collections import defaultdict

_ACCEPT = defaultdict(dict)


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    match = re.search(r"test_criterion_(\d+)(\w*)", report.nodeid)
    if not match:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        num = int(match.group(1))
        part = (match.group(2).strip("_") or "main") + report.nodeid.split(match.group(0))[1]
        ok = report.outcome == "passed"
        _ACCEPT[num][part] = ok


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPT:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPT):
        parts = _ACCEPT[num]
        failed = sorted(p for p, ok in parts.items() if not ok)
        status = "PASS" if not failed else "FAIL"
        detail = f" (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {num:2d}: {status}{detail}")
