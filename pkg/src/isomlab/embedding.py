"""Isometric placement of finite metric spaces in finite-dimensional normed spaces.

The Fréchet map ``x_i -> (d(x_i, x_1), ..., d(x_i, x_n))`` into ``L∞ⁿ`` is an
exact isometry and serves as the oracle. :func:`embed_finite` searches for a
placement in an arbitrary norm by multi-start minimisation of the worst pair
error; it only ever reports residual floors, never impossibility.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .descent import ordered_map, perturbation_descent, restart_rng
from .metric_core import FiniteMetricSpace, validate_metric
from .normed_spaces import LpNorm, Norm, sphere_net

__all__ = [
    "EMBEDDABLE_TOL",
    "CERTIFIED_TOL",
    "EmbeddingResult",
    "EquilateralSet",
    "placement_residual",
    "frechet_embed",
    "embed_finite",
    "equilateral_space",
    "equilateral_search",
    "cube_vertices",
    "petty_simplex",
    "net_union_instance",
]

EMBEDDABLE_TOL = 1e-6
CERTIFIED_TOL = 1e-9
DESCENT_ITERATIONS = 400


@dataclass
class EmbeddingResult:
    placement: np.ndarray
    residual: float
    restarts_used: int
    norm: Norm | None = None
    best_restart: int = 0
    embeddable_tol: float = EMBEDDABLE_TOL
    certified_tol: float = CERTIFIED_TOL

    @property
    def verdict(self) -> str:
        return "embeddable" if self.residual <= self.embeddable_tol else "not-found"

    @property
    def certified(self) -> bool:
        return self.residual <= self.certified_tol

    def describe(self) -> str:
        if self.verdict == "embeddable":
            return "embeddable (numerical)"
        return f"no embedding found (residual {self.residual!r})"

    def to_json(self) -> dict:
        return {
            "placement": self.placement.tolist(),
            "residual": self.residual,
            "verdict": self.verdict,
            "restarts_used": self.restarts_used,
            "thresholds": {"embeddable": self.embeddable_tol, "certified": self.certified_tol},
        }


@dataclass
class EquilateralSet:
    points: np.ndarray
    side: float
    residual: float
    restarts_used: int = 0
    construction: str = "search"

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("an equilateral set needs at least two points")

    def to_json(self) -> dict:
        return {
            "points": np.asarray(self.points).tolist(),
            "side": self.side,
            "residual": self.residual,
            "restarts_used": self.restarts_used,
            "construction": self.construction,
        }


def _pair_residuals(X: np.ndarray, D: np.ndarray, W: Norm, iu) -> np.ndarray:
    """``(..., K)`` signed errors ``||x_i - x_j|| - d_ij`` over upper-triangle pairs."""
    i, j = iu
    return np.asarray(W(X[..., i, :] - X[..., j, :])) - D[i, j]


def placement_residual(X, S: FiniteMetricSpace, W: Norm) -> float:
    """``max_{i<j} | ||x_i - x_j||_W - d_ij |`` (0 for fewer than two points)."""
    X = np.asarray(X, dtype=float)
    if S.n < 2:
        return 0.0
    return float(np.max(np.abs(_pair_residuals(X, S.dist, W, np.triu_indices(S.n, 1)))))


def frechet_embed(S: FiniteMetricSpace) -> EmbeddingResult:
    """Rows of the distance matrix as points of ``L∞ⁿ``."""
    if S.n < 1:
        raise ValueError("need at least one point")
    W = LpNorm(np.inf, S.n)
    X = np.array(S.dist, dtype=float)
    return EmbeddingResult(X, placement_residual(X, S, W), 0, W)


def _fit_columns(X: np.ndarray, k: int) -> np.ndarray:
    if X.shape[1] >= k:
        return X[:, :k].copy()
    return np.hstack([X, np.zeros((X.shape[0], k - X.shape[1]))])


def _deterministic_starts(S: FiniteMetricSpace, k: int) -> list[np.ndarray]:
    F = np.array(S.dist, dtype=float)
    starts = [_fit_columns(F, k)]
    if k < S.n:
        # principal-axis projection of the Fréchet rows, rescaled to the diameter
        C = F - F.mean(axis=0)
        _, _, vt = np.linalg.svd(C, full_matrices=False)
        P = C @ vt[:k].T
        starts.append(P)
    return starts


def _polish(
    X0: np.ndarray, S: FiniteMetricSpace, W: Norm, scale: float, rng, done: float
) -> tuple[np.ndarray, float]:
    n, k = X0.shape
    iu = np.triu_indices(n, 1)
    D = S.dist
    start = placement_residual(X0, S, W)
    if start <= done:
        return X0, start

    def resid(z):
        return _pair_residuals(z.reshape(n, k), D, W, iu)

    try:
        sol = least_squares(resid, X0.ravel(), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * n * k)
        X = sol.x.reshape(n, k)
    except (ValueError, np.linalg.LinAlgError):
        X = X0
    if placement_residual(X, S, W) > start:
        X = X0

    def worst(Z):
        return np.max(np.abs(_pair_residuals(Z, D, W, iu)), axis=-1)

    res = perturbation_descent(
        worst,
        X,
        scale,
        iterations=DESCENT_ITERATIONS,
        min_step=1e-14 * scale,
        rng=rng,
        target=0.0,
        batched=True,
    )
    return res.x, float(res.value)


def embed_finite(
    S: FiniteMetricSpace,
    W: Norm,
    restarts: int = 8,
    seed: int = 0,
    embeddable_tol: float = EMBEDDABLE_TOL,
    certified_tol: float = CERTIFIED_TOL,
) -> EmbeddingResult:
    """Best placement of ``S`` in ``W`` over deterministic and seeded random starts.

    The deterministic starts (Fréchet rows truncated or zero-padded to
    ``dim W``, and their principal-axis projection when ``dim W < |S|``) run
    first; a start that is already certified (residual ``<= certified_tol``)
    is returned unpolished and the random restarts are skipped. Otherwise ``restarts`` total starts are
    used, random ones drawn uniformly from ``[0, diam S]^{|S| x dim W}``. Each
    start is polished by least squares on the pair errors and then by
    perturbation descent on the worst pair error (initial step ``diam S``,
    400 iterations). Merge: minimal residual, ties by lowest restart index.
    """
    n, k = S.n, W.dim
    if n < 2:
        return EmbeddingResult(np.zeros((n, k)), 0.0, 0, W, 0, embeddable_tol, certified_tol)
    scale = S.diameter
    det = _deterministic_starts(S, k)

    def run(r: int):
        rng = restart_rng(seed, r)
        X0 = det[r] if r < len(det) else rng.uniform(0.0, scale, (n, k))
        return _polish(X0, S, W, scale, rng, certified_tol)

    results = ordered_map(run, range(len(det)))
    if min(v for _, v in results) > certified_tol and restarts > len(det):
        results += ordered_map(run, range(len(det), restarts))
    best = min(range(len(results)), key=lambda r: (results[r][1], r))
    X, value = results[best]
    return EmbeddingResult(X, value, len(results), W, best, embeddable_tol, certified_tol)


def equilateral_space(m: int, side: float = 1.0) -> FiniteMetricSpace:
    if m < 2:
        raise ValueError("m must be at least 2")
    if not side > 0:
        raise ValueError("side must be positive")
    return FiniteMetricSpace(tuple(range(m)), side * (1.0 - np.eye(m)))


def cube_vertices(n: int, m: int | None = None, side: float = 1.0) -> np.ndarray:
    """The first ``m`` vertices of ``{0, side}ⁿ`` in lexicographic order."""
    m = 2**n if m is None else m
    if m > 2**n:
        raise ValueError("the cube has only 2^n vertices")
    return side * np.array(list(itertools.islice(itertools.product((0.0, 1.0), repeat=n), m)))


def _is_max_norm(W: Norm) -> bool:
    return isinstance(W, LpNorm) and np.isinf(W.p)


def equilateral_search(
    W: Norm,
    m: int,
    side: float = 1.0,
    restarts: int = 16,
    seed: int = 0,
) -> EquilateralSet:
    """``m`` points at mutual ``W``-distance ``side``, or the best search floor.

    In the max norm with ``m <= 2ⁿ`` the cube-vertex construction is exact
    and tried first; otherwise :func:`embed_finite` searches.
    """
    S = equilateral_space(m, side)
    if _is_max_norm(W) and m <= 2**W.dim:
        X = cube_vertices(W.dim, m, side)
        return EquilateralSet(X, side, placement_residual(X, S, W), 0, "cube-vertices")
    res = embed_finite(S, W, restarts=restarts, seed=seed)
    return EquilateralSet(res.placement, side, res.residual, res.restarts_used, "search")


def petty_simplex(n: int) -> EquilateralSet:
    """``2ⁿ + 1`` lexicographically first vertices of ``{0,1}^{n+1}``: equilateral in ``L∞^{n+1}``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    m = 2**n + 1
    X = cube_vertices(n + 1, m)
    S = equilateral_space(m)
    return EquilateralSet(X, 1.0, placement_residual(X, S, LpNorm(np.inf, n + 1)), 0, "cube-vertices")


def net_union_instance(V: Norm, n: int, seed: int = 0) -> FiniteMetricSpace:
    """The finite space ``sphere_net(V, 1/n) ∪ {0}`` with ``V``-distances; label ``"0"`` first."""
    if n < 1:
        raise ValueError("n must be at least 1")
    net = sphere_net(V, 1.0 / n, seed=seed)
    pts = np.vstack([np.zeros((1, V.dim)), net.points])
    D = np.asarray(V(pts[:, None, :] - pts[None, :, :]))
    D = 0.5 * (D + D.T)
    labels = ["0"] + [f"s{i}" for i in range(len(net.points))]
    return validate_metric(D, labels=labels, tol=1e-12)
