import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from dubrovin.spectrum import validate_gapset

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ONE_GAP = [(1.0, 2.0)]
THREE_GAPS = [(1.0, 2.0), (3.0, 3.5), (5.0, 5.2)]


@pytest.fixture
def one_gap():
    return validate_gapset(ONE_GAP)


@pytest.fixture
def three_gaps():
    return validate_gapset(THREE_GAPS)


@pytest.fixture
def no_gaps():
    return validate_gapset([])


@st.composite
def gapsets(draw, max_gaps=4, e_low=None):
    """Random finite gap sets: positive spacings and lengths."""
    base = draw(st.floats(-2.0, 2.0)) if e_low is None else e_low
    k = draw(st.integers(1, max_gaps))
    edges = []
    pos = base
    for _ in range(k):
        pos += draw(st.floats(0.05, 2.0))
        length = draw(st.floats(0.01, 1.5))
        edges.append((pos, pos + length))
        pos += length
    return validate_gapset(edges, base)


def angles(n):
    return st.lists(st.floats(0.0, 2 * math.pi, exclude_max=True), min_size=n, max_size=n).map(np.array)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion


_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    num, title = marker
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "seen": False})
    if report.when == "call" or report.failed:
        entry["seen"] = True
        if report.failed:
            entry["ok"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] and e["seen"] else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {num:2d}: {e['title']}")
