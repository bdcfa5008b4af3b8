import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Acceptance criteria: nodeid -> (number, title); number -> [outcomes, details]
_CRITERIA: dict = {}
_RESULTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, title): an acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _CRITERIA[item.nodeid] = mark.args


def pytest_runtest_logreport(report):
    crit = _CRITERIA.get(report.nodeid)
    if crit is None or (report.when != "call" and report.passed):
        return
    number, title = crit
    entry = _RESULTS.setdefault(number, [title, [], []])
    entry[1].append(report.outcome)
    entry[2].extend(v for k, v in report.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, outcomes, details = _RESULTS[number]
        verdict = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        line = f"criterion {number:2d}  {verdict}  {title}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        terminalreporter.write_line(line)
