"""Finite metric spaces and the Gromov-Hausdorff distance between them.

Three exact solvers are provided for ``d_GH(X, Y)``:

* ``gh_exact_maps`` enumerates every pair of maps ``f: X -> Y``, ``g: Y -> X``
  and minimises ``max(dis f, codis(f, g), dis g) / 2``;
* ``gh_exact_correspondences`` enumerates every relation ``R`` covering both
  sides and minimises ``dis R / 2``;
* ``gh_branch_and_bound`` searches correspondences depth-first with admissible
  pruning, and degrades to a bracketing interval when its node budget runs out.

All three return the same number on every instance they can finish; the test
suite cross-checks this exhaustively on small integer spaces.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MetricError",
    "AsymmetryError",
    "NegativeEntryError",
    "NonzeroDiagonalError",
    "TriangleViolationError",
    "CoincidentPointsError",
    "BudgetExceededError",
    "Violation",
    "FiniteMetricSpace",
    "MapPair",
    "Correspondence",
    "GHResult",
    "validate_metric",
    "distortion",
    "codistortion",
    "hausdorff_distance",
    "correspondence_distortion",
    "gh_exact_maps",
    "gh_exact_correspondences",
    "gh_lower_bound",
    "gh_branch_and_bound",
    "load_space",
]

DEFAULT_MAP_BUDGET = 2_000_000
DEFAULT_CORRESPONDENCE_BUDGET = 1 << 20
DEFAULT_NODE_BUDGET = 200_000


# ---------------------------------------------------------------------------
# errors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One failed metric axiom. ``where`` holds the offending indices."""

    kind: str
    where: tuple[int, ...]
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.where}: {self.detail}"


class MetricError(ValueError):
    """Raised by :func:`validate_metric`; carries every violation found."""

    kind = "metric"

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:10])
        more = len(self.violations) - 10
        if more > 0:
            lines += f"; ... {more} more"
        super().__init__(lines or "invalid metric")


class AsymmetryError(MetricError):
    kind = "asymmetry"


class NegativeEntryError(MetricError):
    kind = "negative"


class NonzeroDiagonalError(MetricError):
    kind = "diagonal"


class TriangleViolationError(MetricError):
    kind = "triangle"


class CoincidentPointsError(MetricError):
    kind = "coincident"


class BudgetExceededError(RuntimeError):
    """An exhaustive solver would exceed its enumeration budget."""


_ERROR_BY_KIND = {
    cls.kind: cls
    for cls in (
        AsymmetryError,
        NegativeEntryError,
        NonzeroDiagonalError,
        TriangleViolationError,
        CoincidentPointsError,
    )
}


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """``n`` labelled points and their distance matrix.

    Build instances through :func:`validate_metric` unless the matrix is known
    to be a metric (e.g. it was obtained by rescaling a validated one).
    """

    labels: tuple
    dist: np.ndarray

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        labels = tuple(self.labels) if self.labels is not None else tuple(range(len(d)))
        if len(labels) != len(d):
            raise ValueError("label count does not match matrix size")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.dist)

    def __len__(self) -> int:
        return self.n

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def eccentricity(self) -> np.ndarray:
        return self.dist.max(axis=1)

    def scaled(self, lam: float) -> "FiniteMetricSpace":
        if not lam > 0:
            raise ValueError("scale factor must be positive")
        return FiniteMetricSpace(self.labels, lam * self.dist)

    def subspace(self, idx: Iterable[int]) -> "FiniteMetricSpace":
        idx = list(idx)
        return FiniteMetricSpace([self.labels[i] for i in idx], self.dist[np.ix_(idx, idx)])

    def permuted(self, perm: Sequence[int]) -> "FiniteMetricSpace":
        return self.subspace(perm)

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "dist": self.dist.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "FiniteMetricSpace":
        return validate_metric(data["dist"], labels=data.get("labels"))


@dataclass(frozen=True)
class MapPair:
    """A pair of index maps ``fwd: X -> Y`` and ``bwd: Y -> X``."""

    fwd: tuple[int, ...]
    bwd: tuple[int, ...]

    def correspondence(self) -> "Correspondence":
        pairs = {(i, j) for i, j in enumerate(self.fwd)}
        pairs |= {(i, j) for j, i in enumerate(self.bwd)}
        return Correspondence(frozenset(pairs))


@dataclass(frozen=True)
class Correspondence:
    pairs: frozenset

    def is_valid(self, nx: int, ny: int) -> bool:
        xs = {i for i, _ in self.pairs}
        ys = {j for _, j in self.pairs}
        return xs == set(range(nx)) and ys == set(range(ny))

    def sorted_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pairs)


@dataclass
class GHResult:
    value: float
    witness: MapPair | Correspondence
    method: str
    lower_bound: float
    upper_bound: float
    exact: bool = True
    nodes: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        if isinstance(self.witness, MapPair):
            pairs = self.witness.correspondence().sorted_pairs()
        else:
            pairs = self.witness.sorted_pairs()
        out = {
            "value": self.value,
            "method": self.method,
            "lower": self.lower_bound,
            "upper": self.upper_bound,
            "exact": self.exact,
            "witness": [list(p) for p in pairs],
        }
        if isinstance(self.witness, MapPair):
            out["maps"] = {"fwd": list(self.witness.fwd), "bwd": list(self.witness.bwd)}
        return out


# ---------------------------------------------------------------------------
# validation and elementary quantities
# ---------------------------------------------------------------------------


def validate_metric(m, labels=None, tol: float = 0.0) -> FiniteMetricSpace:
    """Check the metric axioms and return a :class:`FiniteMetricSpace`.

    Every violation is collected before raising. The exception class is the
    one matching the first violation found; ``err.violations`` lists them all.
    ``tol`` is an absolute slack for the symmetry and triangle checks.
    """
    d = np.asarray(m, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {d.shape}")
    n = len(d)
    found: list[Violation] = []

    for i in range(n):
        if d[i, i] != 0:
            found.append(Violation("diagonal", (i, i), f"d[{i}][{i}] = {d[i, i]!r}"))
    for i, j in zip(*np.nonzero(d < 0)):
        found.append(Violation("negative", (int(i), int(j)), f"d = {d[i, j]!r}"))
    for i, j in zip(*np.nonzero(np.abs(d - d.T) > tol)):
        if i < j:
            found.append(
                Violation("asymmetry", (int(i), int(j)), f"{d[i, j]!r} != {d[j, i]!r}")
            )
    off = ~np.eye(n, dtype=bool)
    for i, j in zip(*np.nonzero((d == 0) & off)):
        if i < j:
            found.append(Violation("coincident", (int(i), int(j)), "zero distance"))
    if n:
        # excess[i, j, k] = d[i, k] - (d[i, j] + d[j, k])
        excess = d[:, None, :] - (d[:, :, None] + d[None, :, :])
        for i, j, k in zip(*np.nonzero(excess > tol)):
            if i < k and j != i and j != k:
                found.append(
                    Violation(
                        "triangle",
                        (int(i), int(k), int(j)),
                        f"d[{i}][{k}] = {d[i, k]!r} > {d[i, j]!r} + {d[j, k]!r} via {j}",
                    )
                )
    if found:
        raise _ERROR_BY_KIND[found[0].kind](found)
    return FiniteMetricSpace(labels, d)


def _as_index_map(f, n_src: int, n_dst: int) -> np.ndarray:
    f = np.asarray(f, dtype=int)
    if f.shape != (n_src,):
        raise IndexError(f"map must have length {n_src}, got shape {f.shape}")
    if n_src and (f.min() < 0 or f.max() >= n_dst):
        raise IndexError(f"map value out of range 0..{n_dst - 1}")
    return f


def distortion(f, X: FiniteMetricSpace, Y: FiniteMetricSpace) -> float:
    """``sup |d_Y(f x, f x') - d_X(x, x')|`` for an index map ``f``."""
    f = _as_index_map(f, X.n, Y.n)
    if X.n == 0:
        return 0.0
    return float(np.abs(Y.dist[np.ix_(f, f)] - X.dist).max())


def codistortion(p: MapPair, X: FiniteMetricSpace, Y: FiniteMetricSpace) -> float:
    """``sup_{x, y} |d_Y(f x, y) - d_X(x, g y)|``."""
    f = _as_index_map(p.fwd, X.n, Y.n)
    g = _as_index_map(p.bwd, Y.n, X.n)
    if X.n == 0 or Y.n == 0:
        return 0.0
    return float(np.abs(Y.dist[f, :] - X.dist[:, g]).max())


def hausdorff_distance(A: Iterable[int], B: Iterable[int], Z: FiniteMetricSpace) -> float:
    A, B = list(A), list(B)
    if not A or not B:
        raise ValueError("Hausdorff distance needs non-empty subsets")
    block = Z.dist[np.ix_(A, B)]
    return float(max(block.min(axis=1).max(), block.min(axis=0).max()))


def _pair_gap(X: FiniteMetricSpace, Y: FiniteMetricSpace) -> np.ndarray:
    """``gap[x, y, x', y'] = |d_X(x, x') - d_Y(y, y')|``."""
    return np.abs(X.dist[:, None, :, None] - Y.dist[None, :, None, :])


def correspondence_distortion(
    R: Correspondence, X: FiniteMetricSpace, Y: FiniteMetricSpace
) -> float:
    pairs = R.sorted_pairs()
    if not pairs:
        return 0.0
    xs = np.array([i for i, _ in pairs])
    ys = np.array([j for _, j in pairs])
    return float(np.abs(X.dist[np.ix_(xs, xs)] - Y.dist[np.ix_(ys, ys)]).max())


# ---------------------------------------------------------------------------
# exhaustive solvers
# ---------------------------------------------------------------------------


def _all_maps(n_src: int, n_dst: int) -> np.ndarray:
    if n_src == 0:
        return np.zeros((1, 0), dtype=int)
    grids = np.indices((n_dst,) * n_src).reshape(n_src, -1).T
    return grids


def _map_distortions(F: np.ndarray, X: FiniteMetricSpace, Y: FiniteMetricSpace) -> np.ndarray:
    return np.abs(Y.dist[F[:, :, None], F[:, None, :]] - X.dist).max(axis=(1, 2))


def gh_exact_maps(
    X: FiniteMetricSpace, Y: FiniteMetricSpace, budget: int = DEFAULT_MAP_BUDGET
) -> GHResult:
    """Exact ``d_GH`` by exhausting every map pair ``(f, g)``."""
    if X.n == 0 or Y.n == 0:
        raise ValueError("spaces must be non-empty")
    n_pairs = Y.n**X.n * X.n**Y.n
    if n_pairs > budget:
        raise BudgetExceededError(
            f"{n_pairs} map pairs exceed budget {budget}; use gh_branch_and_bound"
        )
    F = _all_maps(X.n, Y.n)
    G = _all_maps(Y.n, X.n)
    dis_f = _map_distortions(F, X, Y)
    dis_g = _map_distortions(G, Y, X)
    # A[f, x, y] = d_Y(f x, y);  B[g, x, y] = d_X(x, g y)
    A = Y.dist[F]
    B = np.moveaxis(X.dist[:, G], 1, 0)

    best, best_f, best_g = np.inf, 0, 0
    chunk = max(1, 4_000_000 // max(1, len(G) * X.n * Y.n))
    for start in range(0, len(F), chunk):
        a = A[start : start + chunk]
        codis = np.abs(a[:, None] - B[None]).max(axis=(2, 3))
        obj = np.maximum(np.maximum(dis_f[start : start + chunk, None], codis), dis_g[None])
        k = int(np.argmin(obj))
        i, j = divmod(k, len(G))
        if obj[i, j] < best:
            best, best_f, best_g = float(obj[i, j]), start + i, j
    value = 0.5 * best
    witness = MapPair(tuple(int(v) for v in F[best_f]), tuple(int(v) for v in G[best_g]))
    return GHResult(value, witness, "brute-force-maps", value, value, nodes=n_pairs)


def gh_exact_correspondences(
    X: FiniteMetricSpace, Y: FiniteMetricSpace, budget: int = DEFAULT_CORRESPONDENCE_BUDGET
) -> GHResult:
    """Exact ``d_GH`` by exhausting every relation ``R`` in ``X x Y``.

    ``dis`` of every bitmask relation is filled in by a subset recursion
    (``O(2^N)`` for ``N = |X||Y|``), then the covering masks are filtered.
    """
    if X.n == 0 or Y.n == 0:
        raise ValueError("spaces must be non-empty")
    nx, ny = X.n, Y.n
    N = nx * ny
    if (1 << N) > budget:
        raise BudgetExceededError(
            f"2^{N} relations exceed budget {budget}; use gh_branch_and_bound"
        )
    gap = _pair_gap(X, Y).reshape(N, N)
    dis = np.zeros(1 << N)
    for k in range(N):
        half = 1 << k
        # sub[m] = max_{j in m} gap[k, j] for masks m < 2^k
        sub = np.zeros(half)
        for j in range(k):
            b = 1 << j
            np.maximum(sub[:b], gap[k, j], out=sub[b : 2 * b])
        np.maximum(dis[:half], sub, out=dis[half : 2 * half])

    masks = np.arange(1 << N, dtype=np.int64)
    ok = np.ones(1 << N, dtype=bool)
    for x in range(nx):
        row = sum(1 << (x * ny + y) for y in range(ny))
        ok &= (masks & row) != 0
    for y in range(ny):
        col = sum(1 << (x * ny + y) for x in range(nx))
        ok &= (masks & col) != 0
    cand = np.flatnonzero(ok)
    k = int(cand[np.argmin(dis[cand])])
    value = 0.5 * float(dis[k])
    pairs = frozenset(divmod(p, ny) for p in range(N) if (k >> p) & 1)
    return GHResult(
        value, Correspondence(pairs), "brute-force-correspondences", value, value, nodes=1 << N
    )


# ---------------------------------------------------------------------------
# bounds and branch-and-bound
# ---------------------------------------------------------------------------


def _distance_values(X: FiniteMetricSpace) -> np.ndarray:
    return np.unique(X.dist)  # includes the diagonal zero


def gh_lower_bound(X: FiniteMetricSpace, Y: FiniteMetricSpace) -> float:
    """Cheap admissible lower bound on ``d_GH(X, Y)``.

    The larger of half the diameter gap and half the Hausdorff distance
    between the two sets of distance values (zero included). Any correspondence
    ``R`` pairs each value ``d_X(x, x')`` with some ``d_Y(y, y')`` within
    ``dis R``, so both quantities are at most ``dis R``.
    """
    diam_gap = abs(X.diameter - Y.diameter)
    a, b = _distance_values(X), _distance_values(Y)
    cross = np.abs(a[:, None] - b[None, :])
    value_gap = max(cross.min(axis=1).max(), cross.min(axis=0).max())
    return 0.5 * float(max(diam_gap, value_gap))


def _bnb_order(X: FiniteMetricSpace) -> list[int]:
    ecc = X.eccentricity()
    return sorted(range(X.n), key=lambda i: (-ecc[i], i))


def gh_branch_and_bound(
    X: FiniteMetricSpace,
    Y: FiniteMetricSpace,
    budget: int = DEFAULT_NODE_BUDGET,
) -> GHResult:
    """Depth-first search over correspondences with admissible pruning.

    Every correspondence contains ``graph(f) | graph(g)^T`` for some map pair,
    and ``dis`` is monotone under inclusion, so it suffices to branch first on
    the partner ``f(x)`` of each ``x`` (decreasing eccentricity), then on a
    partner for each ``y`` still uncovered. A node's bound is the largest of
    its partial distortion and, for every unassigned point, the cheapest
    single pair that could cover it.

    When the node budget runs out the result brackets the optimum:
    ``lower_bound`` is the smallest bound among unexplored nodes and the
    witness is the best complete correspondence seen.
    """
    if X.n == 0 or Y.n == 0:
        raise ValueError("spaces must be non-empty")
    nx, ny = X.n, Y.n
    gap = _pair_gap(X, Y)
    floor2 = 2.0 * gh_lower_bound(X, Y)
    ecc_x, ecc_y = X.eccentricity(), Y.eccentricity()
    x_order = _bnb_order(X)
    y_order = _bnb_order(Y)
    ecc_mismatch = np.abs(ecc_x[:, None] - ecc_y[None, :])

    # fallback witness: the full relation
    best = float(gap.max())
    best_pairs = frozenset(itertools.product(range(nx), range(ny)))

    # a state: (bound, depth, cost, pairs, cover_y, C) where
    # C[x, y] = max_{p in pairs} gap[x, y, p] (cost of adding (x, y))
    C0 = np.zeros((nx, ny))
    stack = [(floor2, 0, 0.0, (), np.zeros(ny, dtype=bool), C0)]
    nodes = 0
    exhausted = False

    while stack:
        bound, depth, cost, pairs, cover, C = stack.pop()
        if bound >= best:
            continue
        if nodes >= budget:
            stack.append((bound, depth, cost, pairs, cover, C))
            exhausted = True
            break
        nodes += 1

        if depth < nx:
            x = x_order[depth]
            ys = sorted(range(ny), key=lambda y: (C[x, y], ecc_mismatch[x, y], y))
            children = [(x, y) for y in ys]
        else:
            free = [y for y in y_order if not cover[y]]
            if not free:
                best, best_pairs = cost, frozenset(pairs)
                if best <= floor2:
                    break
                continue
            y = free[0]
            xs = sorted(range(nx), key=lambda x: (C[x, y], ecc_mismatch[x, y], x))
            children = [(x, y) for x in xs]

        expanded = []
        for x, y in children:
            c = max(cost, C[x, y])
            if c >= best:
                continue
            C2 = np.maximum(C, gap[:, :, x, y])
            cover2 = cover.copy()
            cover2[y] = True
            d2 = depth + 1
            b = max(c, floor2)
            if d2 < nx:
                rest = [x_order[k] for k in range(d2, nx)]
                b = max(b, float(C2[rest].min(axis=1).max()))
            uncovered = ~cover2
            if uncovered.any():
                b = max(b, float(C2[:, uncovered].min(axis=0).max()))
            if b >= best:
                continue
            expanded.append((b, d2, c, pairs + ((x, y),), cover2, C2))
        # push in reverse so the cheapest child is explored first
        stack.extend(reversed(expanded))

    if exhausted:
        open_bounds = [s[0] for s in stack if s[0] < best]
        lower2 = min([best] + open_bounds)
    else:
        lower2 = best
    value = 0.5 * best
    return GHResult(
        value,
        Correspondence(best_pairs),
        "branch-and-bound",
        0.5 * lower2,
        value,
        exact=not exhausted,
        nodes=nodes,
    )


def load_space(path) -> FiniteMetricSpace:
    with open(path) as fh:
        return FiniteMetricSpace.from_json(json.load(fh))
