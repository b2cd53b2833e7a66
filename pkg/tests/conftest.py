from collections import defaultdict

import pytest

CRITERIA = {
    1: "special-function identities",
    2: "small-distance expansion of c_n",
    3: "inequality on zonal oracle",
    4: "inequality on grid LP and LP-vs-oracle gap",
    5: "exact and entropic solver correctness",
    6: "second-order coefficient of the inf-convolution",
    7: "sharp Poincare recovery",
    8: "classical comparison and entropy ordering",
    9: "convexity scan of c_n",
    10: "deterministic verify output",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[marker.args[0]].append((item.name, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_outcomes):
        results = _outcomes[k]
        failed = [name for name, ok in results if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {k:2d} {status}  {CRITERIA.get(k, '')} ({len(results) - len(failed)}/{len(results)} checks)"
        if failed:
            line += "  failing: " + ", ".join(failed)
        terminalreporter.write_line(line)
