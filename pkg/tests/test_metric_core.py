from __future__ import annotations

import itertools
import json

import numpy as np
import pytest

from isomlab.metric_core import (
    AsymmetryError,
    BudgetExceededError,
    CoincidentPointsError,
    Correspondence,
    FiniteMetricSpace,
    MapPair,
    NegativeEntryError,
    NonzeroDiagonalError,
    TriangleViolationError,
    codistortion,
    correspondence_distortion,
    distortion,
    gh_branch_and_bound,
    gh_exact_correspondences,
    gh_exact_maps,
    gh_lower_bound,
    hausdorff_distance,
    load_space,
    validate_metric,
)

from conftest import random_euclidean_space, random_int_space


def space(*rows):
    return validate_metric(rows)


def two_point(a):
    return space([0, a], [a, 0])


POINT = FiniteMetricSpace((0,), np.zeros((1, 1)))


def oracle_gh(X, Y):
    """Plain-Python enumeration of all correspondences (independent of the library)."""
    cells = [(i, j) for i in range(X.n) for j in range(Y.n)]
    best = np.inf
    for r in range(1, len(cells) + 1):
        for R in itertools.combinations(cells, r):
            if {i for i, _ in R} != set(range(X.n)) or {j for _, j in R} != set(range(Y.n)):
                continue
            dis = max(abs(X.dist[i, k] - Y.dist[j, l]) for (i, j) in R for (k, l) in R)
            best = min(best, dis)
    return best / 2


# --- validation ------------------------------------------------------------


def test_valid_two_point_space():
    S = validate_metric([[0, 1], [1, 0]])
    assert S.n == 2 and S.diameter == 1.0


def test_asymmetry_reports_the_entry():
    with pytest.raises(AsymmetryError) as err:
        validate_metric([[0, 1], [2, 0]])
    assert err.value.violations[0].kind == "asymmetry"
    assert set(err.value.violations[0].where) == {0, 1}


def test_triangle_violation_names_the_triple():
    with pytest.raises(TriangleViolationError) as err:
        validate_metric([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    assert (0, 2, 1) in [v.where for v in err.value.violations]


@pytest.mark.parametrize(
    "m, exc",
    [
        ([[0, -1], [-1, 0]], NegativeEntryError),
        ([[1, 1], [1, 0]], NonzeroDiagonalError),
        ([[0, 0], [0, 0]], CoincidentPointsError),
    ],
)
def test_each_axiom_has_its_own_error(m, exc):
    with pytest.raises(exc):
        validate_metric(m)


def test_all_violations_are_collected():
    with pytest.raises(Exception) as err:
        validate_metric([[0, 1, 9], [2, 0, 1], [9, 1, 0]])
    kinds = {v.kind for v in err.value.violations}
    assert {"asymmetry", "triangle"} <= kinds


def test_non_square_matrix_rejected():
    with pytest.raises(ValueError):
        validate_metric([[0, 1, 2], [1, 0, 1]])


def test_json_round_trip(tmp_path):
    S = validate_metric([[0, 0.1, 0.3], [0.1, 0, 0.25], [0.3, 0.25, 0]], labels=["a", "b", "c"])
    path = tmp_path / "s.json"
    path.write_text(json.dumps(S.to_json()))
    T = load_space(path)
    assert T.labels == ("a", "b", "c")
    assert np.array_equal(T.dist, S.dist)


def test_distance_matrix_is_read_only():
    S = two_point(1)
    with pytest.raises(ValueError):
        S.dist[0, 1] = 5


# --- distortion, codistortion, Hausdorff ----------------------------------------


def test_distortion_examples(rng):
    X = random_int_space(rng, 4)
    assert distortion(list(range(4)), X, X) == 0
    assert distortion([0, 0, 0, 0], X, X) == X.diameter
    assert distortion([0, 1], two_point(1), two_point(3)) == 2


def test_distortion_index_out_of_range():
    with pytest.raises((IndexError, ValueError)):
        distortion([0, 2], two_point(1), two_point(1))


def test_codistortion_examples():
    X = two_point(2)
    assert codistortion(MapPair((1, 0), (1, 0)), X, X) == 0
    assert codistortion(MapPair((0,), (0,)), POINT, POINT) == 0
    assert codistortion(MapPair((0,), (0, 0)), POINT, two_point(2)) == 2


def test_codistortion_swap_symmetry(rng):
    for _ in range(30):
        X, Y = random_int_space(rng, 3), random_int_space(rng, 4)
        f = tuple(rng.integers(0, 4, 3))
        g = tuple(rng.integers(0, 3, 4))
        assert codistortion(MapPair(f, g), X, Y) == codistortion(MapPair(g, f), Y, X)


def test_distortion_zero_iff_isometric_embedding(rng):
    X = random_int_space(rng, 3)
    D = X.diameter
    Y = validate_metric(np.block([[X.dist, np.full((3, 1), D)], [np.full((1, 3), D), np.zeros((1, 1))]]))
    for f in itertools.product(range(4), repeat=3):
        preserves = all(Y.dist[f[i], f[j]] == X.dist[i, j] for i in range(3) for j in range(3))
        assert (distortion(list(f), X, Y) == 0) == preserves
    assert distortion([0, 1, 2], X, Y) == 0


def test_hausdorff_examples(rng):
    Z = random_int_space(rng, 4)
    assert hausdorff_distance([0, 1], [1, 0], Z) == 0
    assert hausdorff_distance([2], range(4), Z) == Z.eccentricity()[2]
    assert hausdorff_distance([0], [3], Z) == Z.dist[0, 3]
    with pytest.raises(ValueError):
        hausdorff_distance([], [1], Z)


def test_correspondence_distortion_of_identity(rng):
    X = random_int_space(rng, 4)
    R = Correspondence(frozenset((i, i) for i in range(4)))
    assert R.is_valid(4, 4)
    assert correspondence_distortion(R, X, X) == 0


# --- exact GH ------------------------------------------------------------------


def test_gh_maps_examples():
    assert gh_exact_maps(two_point(3), two_point(3)).value == 0
    assert gh_exact_maps(POINT, two_point(2)).value == 1
    assert gh_exact_maps(two_point(1), two_point(3)).value == 1


def test_gh_correspondence_examples(rng):
    X = random_int_space(rng, 4)
    assert gh_exact_correspondences(X, X).value == 0
    assert gh_exact_correspondences(X, POINT).value == X.diameter / 2
    for a, b in itertools.product(range(1, 6), repeat=2):
        assert gh_exact_correspondences(two_point(a), two_point(b)).value == abs(a - b) / 2


def test_exact_methods_report_witness_and_bracket(rng):
    X, Y = random_int_space(rng, 3), random_int_space(rng, 4)
    for res in (gh_exact_maps(X, Y), gh_exact_correspondences(X, Y), gh_branch_and_bound(X, Y)):
        assert res.exact
        assert res.lower_bound == res.value == res.upper_bound
        R = res.witness.correspondence() if isinstance(res.witness, MapPair) else res.witness
        assert R.is_valid(X.n, Y.n)
        assert correspondence_distortion(R, X, Y) / 2 == pytest.approx(res.value, abs=1e-12)


def test_against_plain_python_oracle(rng):
    for _ in range(40):
        X = random_int_space(rng, int(rng.integers(1, 4)))
        Y = random_int_space(rng, int(rng.integers(1, 4)))
        expected = oracle_gh(X, Y)
        assert gh_exact_maps(X, Y).value == expected
        assert gh_branch_and_bound(X, Y).value == expected


def test_budget_guards():
    X = random_int_space(np.random.default_rng(1), 6)
    with pytest.raises(BudgetExceededError):
        gh_exact_maps(X, X, budget=10)
    with pytest.raises(BudgetExceededError):
        gh_exact_correspondences(X, X, budget=10)


def test_branch_and_bound_brackets_when_budget_runs_out(rng):
    X, Y = random_euclidean_space(rng, 7), random_euclidean_space(rng, 7)
    full = gh_branch_and_bound(X, Y)
    cut = gh_branch_and_bound(X, Y, budget=5)
    assert not cut.exact
    assert cut.lower_bound <= full.value + 1e-12 <= cut.upper_bound + 2e-12
    R = cut.witness
    assert R.is_valid(X.n, Y.n)
    assert correspondence_distortion(R, X, Y) / 2 == pytest.approx(cut.upper_bound, abs=1e-12)


def test_branch_and_bound_identity_is_immediate(rng):
    X = random_euclidean_space(rng, 8)
    res = gh_branch_and_bound(X, X)
    assert res.value == 0 and res.exact


def test_gh_zero_for_relabelled_copies(rng):
    X = random_int_space(rng, 5)
    perm = rng.permutation(5)
    assert gh_branch_and_bound(X, X.permuted(perm)).value == 0


def test_gh_positive_for_non_isometric_spaces(rng):
    for _ in range(20):
        X, Y = random_int_space(rng, 4), random_int_space(rng, 4)
        isometric = any(np.array_equal(X.dist, Y.dist[np.ix_(p, p)]) for p in itertools.permutations(range(4)))
        assert (gh_branch_and_bound(X, Y).value == 0) == isometric


# --- lower bound ------------------------------------------------------------------


def test_lower_bound_examples(rng):
    X = random_int_space(rng, 4)
    assert gh_lower_bound(X, X) == 0
    assert gh_lower_bound(two_point(4), two_point(1)) >= 1.5
    assert gh_lower_bound(POINT, two_point(2)) == 1 == gh_exact_maps(POINT, two_point(2)).value


def test_lower_bound_admissible_on_random_pairs(rng):
    for _ in range(150):
        X = random_int_space(rng, int(rng.integers(1, 5)))
        Y = random_int_space(rng, int(rng.integers(1, 5)))
        assert gh_lower_bound(X, Y) <= gh_exact_correspondences(X, Y).value + 1e-12
