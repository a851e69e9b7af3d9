import random

import pytest

from pdte.he import BINARY, INTEGER, Evaluator, HeParams, keygen


def make_keys(mode=BINARY, slots=1, levels=64, seed=0):
    kt = keygen(HeParams(mode, slots, levels, seed=seed))
    return kt, Evaluator(kt.ek, kt.pk)


@pytest.fixture
def bin_keys():
    return make_keys(BINARY, slots=8)


@pytest.fixture
def int_keys():
    return make_keys(INTEGER, slots=16)


@pytest.fixture
def rng():
    return random.Random(1234)


# --- acceptance criteria summary ----------------------------------------------

_criteria: dict = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            number, title = mark.args
            _criteria.setdefault(number, {"title": title, "outcomes": {}})["outcomes"][item.nodeid] = None


def pytest_runtest_logreport(report):
    for entry in _criteria.values():
        outcomes = entry["outcomes"]
        if report.nodeid in outcomes and (report.when == "call" or report.outcome != "passed"):
            if outcomes[report.nodeid] in (None, "passed"):
                outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        results = entry["outcomes"].values()
        if all(r == "passed" for r in results):
            verdict = "PASS"
        elif any(r is None for r in results) and not any(r == "failed" for r in results):
            verdict = "NOT RUN"
        else:
            verdict = "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} [PRIMARY] {verdict}: {entry['title']}")
