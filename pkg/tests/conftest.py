import functools
import time
from collections import defaultdict

import pytest
from hypothesis import settings

from satsis.cli import simulate
from satsis.scenarios import builtin

# property tests must be reproducible run to run
settings.register_profile("repro", derandomize=True, deadline=None,
                          print_blob=True)
settings.load_profile("repro")

_CRITERIA = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = "; ".join(str(v) for k, v in report.user_properties
                           if k == "detail")
        _CRITERIA[marker.args[0]].append(
            (item.name, report.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        ok = all(passed for _, passed, _ in results)
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} "
                      f"({sum(p for _, p, _ in results)}/{len(results)} checks)")
        for name, passed, detail in results:
            mark = "ok  " if passed else "FAIL"
            tr.write_line(f"    {mark} {name}" + (f": {detail}" if detail else ""))


RUN_SECONDS = {}


@functools.lru_cache(maxsize=None)
def _run(name):
    start = time.perf_counter()
    result = simulate(builtin(name))
    RUN_SECONDS[name] = time.perf_counter() - start
    return result


@pytest.fixture(scope="session")
def builtin_run():
    """``builtin_run(name)`` -> (setup, trajectory, report, predictions,
    summary), computed once per session; wall times land in
    ``builtin_run.seconds``."""
    _run.seconds = RUN_SECONDS
    return _run
