from __future__ import annotations

import itertools
from collections import OrderedDict

import numpy as np
import pytest

from isomlab.metric_core import FiniteMetricSpace, MetricError, validate_metric


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_int_space(rng, n: int, lo: int = 1, hi: int = 5) -> FiniteMetricSpace:
    """An ``n``-point metric with integer distances in ``[lo, hi]``.

    Up to four points: uniform over such metrics by rejection sampling. Larger
    sizes use the shortest-path closure of random integer weights, which is
    always a metric and keeps every distance in ``[lo, hi]``.
    """
    if n == 1:
        return FiniteMetricSpace((0,), np.zeros((1, 1)))
    if n > 4:
        w = rng.integers(lo, hi + 1, (n, n)).astype(float)
        w = np.minimum(w, w.T)
        np.fill_diagonal(w, 0)
        for k in range(n):
            w = np.minimum(w, w[:, k : k + 1] + w[k : k + 1, :])
        return validate_metric(w)
    while True:
        d = np.zeros((n, n))
        iu = np.triu_indices(n, 1)
        d[iu] = rng.integers(lo, hi + 1, len(iu[0]))
        d = d + d.T
        try:
            return validate_metric(d)
        except MetricError:
            continue


def random_euclidean_space(rng, n: int, dim: int = 3) -> FiniteMetricSpace:
    pts = rng.standard_normal((n, dim))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    return validate_metric(d, tol=1e-12)


def integer_spaces_up_to_isometry(max_points: int = 3, hi: int = 5) -> list[FiniteMetricSpace]:
    """Every metric on 1..``max_points`` points with distances in ``{1..hi}``, one per isometry class."""
    out = [FiniteMetricSpace((0,), np.zeros((1, 1)))]
    out += [FiniteMetricSpace((0, 1), np.array([[0.0, a], [a, 0.0]])) for a in range(1, hi + 1)]
    if max_points >= 3:
        for a, b, c in itertools.combinations_with_replacement(range(1, hi + 1), 3):
            if c <= a + b:
                out.append(validate_metric([[0, a, b], [a, 0, c], [b, c, 0]]))
    return out


@pytest.fixture
def make_int_space():
    return random_int_space


@pytest.fixture
def make_euclidean_space():
    return random_euclidean_space


# ---------------------------------------------------------------------------
# one PASS/FAIL line per acceptance criterion
# ---------------------------------------------------------------------------

_CRITERIA: "OrderedDict[int, dict]" = OrderedDict()


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            entry = _CRITERIA.setdefault(number, {"title": title, "outcomes": []})
            entry.setdefault("nodes", []).append(item.nodeid)


def pytest_runtest_logreport(report):
    for number, entry in _CRITERIA.items():
        if report.nodeid in entry.get("nodes", ()):
            if report.when == "call" or report.outcome != "passed":
                entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        outcomes = entry["outcomes"]
        if not outcomes:
            verdict = "NOT RUN"
        else:
            verdict = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {entry['title']}")
