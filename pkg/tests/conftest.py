import collections
import sys
from pathlib import Path

import pytest

# allow the shared oracles module to be imported as a plain module
sys.path.insert(0, str(Path(__file__).parent))

# --- acceptance criterion reporting -------------------------------------------
#
# Tests in test_acceptance.py carry @pytest.mark.acceptance(num, "name").
# One summary line per criterion is printed at the end of the run; strict
# xfails (verified upstream inconsistencies, documented out of tree) are
# counted separately so a criterion's line shows what is known-red and why.

_results = collections.defaultdict(
    lambda: {"name": "", "passed": 0, "failed": 0, "xfailed": 0, "seconds": 0.0})


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(num, name): group a test under an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker:
        report.acceptance = (marker.args[0], marker.args[1])


def pytest_runtest_logreport(report):
    tag = getattr(report, "acceptance", None)
    if tag is None:
        return
    num, name = tag
    rec = _results[num]
    rec["name"] = name
    rec["seconds"] += getattr(report, "duration", 0.0)
    if report.when == "call":
        if report.skipped and hasattr(report, "wasxfail"):
            rec["xfailed"] += 1
        elif report.passed:
            rec["passed"] += 1
        elif report.failed:
            rec["failed"] += 1
    elif report.failed:
        rec["failed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        rec = _results[num]
        status = "FAIL" if rec["failed"] else "PASS"
        line = (f"criterion {num} — {rec['name']}: {status} "
                f"[{rec['passed']} checks, {rec['seconds']:.1f}s]")
        if rec["xfailed"]:
            line += (f" ({rec['xfailed']} known upstream inconsistencies xfailed;"
                     f" see decisions ledger)")
        terminalreporter.write_line(line)
