import time

import pytest

CRITERIA = {
    1: "exact golden moments, three engines",
    2: "degree-6 consistency",
    3: "cross-engine sweep",
    4: "series vs Schwinger-Dyson",
    5: "Monte Carlo",
    6: "property suites",
    7: "determinism",
}

_results: dict[int, tuple[str, float]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    yield
    item.user_properties.append(("elapsed", time.perf_counter() - start))


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    elapsed = dict(report.user_properties).get("elapsed", 0.0)
    _results[marker] = ("PASS" if report.passed else "FAIL", elapsed)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        status, elapsed = _results[n]
        terminalreporter.write_line(f"criterion {n} ({CRITERIA[n]}): {status} in {elapsed:.1f} s")
