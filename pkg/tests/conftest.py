from collections import defaultdict

import pytest

CRITERIA = {
    1: "exact unbiasedness on the enumeration grid",
    2: "variance formulas match enumeration",
    3: "enumeration engine self-test",
    4: "exponential decay of v1",
    5: "chain toy example v1 < v0 at n=10",
    6: "2F1 closed form and complement",
    7: "simulator fidelity",
    8: "harmonic-mean estimator behavior",
    9: "importance-sampling reduction and design",
    10: "CLI determinism",
}

_criterion_of: dict[str, int] = {}
_outcomes: dict[int, list[str]] = defaultdict(list)
_details: dict[int, list[str]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num): acceptance criterion checked by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_of[item.nodeid] = mark.args[0]


def pytest_runtest_logreport(report):
    num = _criterion_of.get(report.nodeid)
    if num is None:
        return
    if report.when == "call" or report.outcome == "failed":
        if hasattr(report, "wasxfail"):
            # an expected failure is still a criterion that does not hold
            _outcomes[num].append("xfailed" if report.skipped else "failed")
        else:
            _outcomes[num].append(report.outcome)


@pytest.fixture
def acceptance(request):
    """Record a detail line for the criterion summary."""
    num = request.node.get_closest_marker("criterion").args[0]
    return _details[num].append


def pytest_terminal_summary(terminalreporter):
    if not _criterion_of:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num, title in CRITERIA.items():
        outcomes = _outcomes.get(num)
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes):
            status = "PASS"
        else:
            status = "FAIL"
        detail = "; ".join(_details.get(num, ()))
        tr.write_line(f"Criterion {num} ({title}): {status}" + (f" | {detail}" if detail else ""))
