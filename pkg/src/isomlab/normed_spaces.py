"""Finite-dimensional norms, sphere nets, operator norms and Banach-Mazur estimates.

Norms are small frozen dataclasses evaluated along the last axis::

    >>> LpNorm(1, 2)([3.0, -4.0])
    7.0

Three kinds exist: ``LpNorm`` (``1 <= p <= inf``), ``PolytopeNorm``
(``max_i |<a_i, v>|`` over functionals spanning the dual) and ``ProductNorm``,
the norm ``||(v, t)|| = ||(||v||_base, t)||_plane`` on ``V + R``.
"""
from __future__ import annotations

import functools
import itertools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .descent import ordered_map, perturbation_descent, restart_rng
from .metric_core import (
    DEFAULT_NODE_BUDGET,
    FiniteMetricSpace,
    gh_branch_and_bound,
)

__all__ = [
    "Norm",
    "LpNorm",
    "PolytopeNorm",
    "ProductNorm",
    "DimensionMismatchError",
    "NetTooCoarseError",
    "norm_eval",
    "parse_norm",
    "norm_from_json",
    "builtin_norms",
    "extreme_points",
    "random_sphere",
    "random_ball",
    "LinearMap",
    "SphereNet",
    "sphere_net",
    "default_net_eps",
    "operator_norm",
    "BMEstimate",
    "banach_mazur_estimate",
    "kadets_gh_relation_report",
]


class DimensionMismatchError(ValueError):
    pass


class NetTooCoarseError(RuntimeError):
    def __init__(self, eps: float, achieved: float):
        self.eps = eps
        self.achieved = achieved
        super().__init__(f"audited covering radius {achieved:.6g} exceeds eps={eps:.6g}")


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


class Norm:
    dim: int

    def __call__(self, v) -> np.ndarray | float:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.dim,):
            raise DimensionMismatchError(f"expected last axis {self.dim}, got shape {v.shape}")
        out = self._eval(v)
        return float(out) if np.ndim(out) == 0 else out

    def _eval(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    @property
    def is_polyhedral(self) -> bool:
        return False


@dataclass(frozen=True)
class LpNorm(Norm):
    p: float
    dim: int

    def __post_init__(self):
        p = float(self.p)
        if not p >= 1:
            raise ValueError(f"p = {self.p} < 1 does not define a norm")
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        object.__setattr__(self, "p", p)

    def _eval(self, v):
        a = np.abs(v)
        if self.p == 1:
            return a.sum(axis=-1)
        if self.p == 2:
            return np.sqrt((a * a).sum(axis=-1))
        if math.isinf(self.p):
            return a.max(axis=-1)
        m = a.max(axis=-1, keepdims=True)
        safe = np.where(m > 0, m, 1.0)
        return (m * ((a / safe) ** self.p).sum(axis=-1, keepdims=True) ** (1 / self.p))[..., 0]

    @property
    def is_polyhedral(self) -> bool:
        return self.p == 1 or math.isinf(self.p)

    def to_json(self) -> dict:
        return {"dim": self.dim, "kind": "lp", "p": "inf" if math.isinf(self.p) else self.p}

    def __repr__(self) -> str:
        p = "inf" if math.isinf(self.p) else f"{self.p:g}"
        return f"L{p}^{self.dim}"


@dataclass(frozen=True)
class PolytopeNorm(Norm):
    """``||v|| = max_i |<a_i, v>|``; the unit ball is ``{v : |<a_i, v>| <= 1}``."""

    functionals: tuple

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.functionals, dtype=float))
        if A.size == 0:
            raise ValueError("polytope norm needs at least one functional")
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise ValueError("functionals do not span the dual space; the unit ball is unbounded")
        object.__setattr__(self, "functionals", tuple(tuple(float(x) for x in row) for row in A))

    @property
    def dim(self) -> int:
        return len(self.functionals[0])

    @functools.cached_property
    def matrix(self) -> np.ndarray:
        return np.array(self.functionals)

    def _eval(self, v):
        return np.abs(v @ self.matrix.T).max(axis=-1)

    @property
    def is_polyhedral(self) -> bool:
        return True

    def to_json(self) -> dict:
        return {"dim": self.dim, "kind": "polytope", "functionals": [list(r) for r in self.functionals]}

    def __repr__(self) -> str:
        return f"Polytope^{self.dim}[{len(self.functionals)}]"


@dataclass(frozen=True)
class ProductNorm(Norm):
    base: Norm
    plane: Norm

    def __post_init__(self):
        if self.plane.dim != 2:
            raise ValueError("plane norm must be two-dimensional")

    @property
    def dim(self) -> int:
        return self.base.dim + 1

    def _eval(self, v):
        inner = self.base._eval(v[..., :-1])
        return self.plane._eval(np.stack([inner, v[..., -1]], axis=-1))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "kind": "product",
            "base": self.base.to_json(),
            "plane": self.plane.to_json(),
        }

    def __repr__(self) -> str:
        return f"({self.base!r} (+) R; {self.plane!r})"


def norm_eval(N: Norm, v) -> float | np.ndarray:
    return N(v)


def norm_from_json(data: dict) -> Norm:
    kind = data["kind"]
    if kind == "lp":
        p = data["p"]
        p = math.inf if p in ("inf", "Infinity", None) else float(p)
        return LpNorm(p, int(data["dim"]))
    if kind == "polytope":
        N = PolytopeNorm(tuple(map(tuple, data["functionals"])))
        if "dim" in data and int(data["dim"]) != N.dim:
            raise DimensionMismatchError("declared dim does not match functionals")
        return N
    if kind == "product":
        return ProductNorm(norm_from_json(data["base"]), norm_from_json(data["plane"]))
    raise ValueError(f"unknown norm kind {kind!r}")


def parse_norm(spec: str) -> Norm:
    """Parse ``lp:<p>:<dim>``, ``l1:<dim>``, ``l2:<dim>``, ``linf:<dim>`` or a JSON file path."""
    parts = spec.split(":")
    head = parts[0].lower()
    try:
        if head == "lp" and len(parts) == 3:
            p = math.inf if parts[1].lower() in ("inf", "infinity") else float(parts[1])
            return LpNorm(p, int(parts[2]))
        if head in ("l1", "l2", "linf") and len(parts) == 2:
            p = {"l1": 1.0, "l2": 2.0, "linf": math.inf}[head]
            return LpNorm(p, int(parts[1]))
    except ValueError as err:
        raise ValueError(f"bad norm shorthand {spec!r}: {err}") from None
    if not os.path.isfile(spec):
        raise ValueError(f"{spec!r} is neither a norm shorthand nor a norm JSON file")
    with open(spec) as fh:
        return norm_from_json(json.load(fh))


def builtin_norms(dim: int) -> dict[str, Norm]:
    """The norms used across the test and acceptance suites."""
    out: dict[str, Norm] = {
        "l1": LpNorm(1, dim),
        "l2": LpNorm(2, dim),
        "linf": LpNorm(math.inf, dim),
        "l3": LpNorm(3, dim),
    }
    if dim == 2:
        ang = np.pi / 3 * np.arange(3)
        out["hexagon"] = PolytopeNorm(tuple(zip(np.cos(ang), np.sin(ang))))
    if dim == 3:
        out["cylinder"] = ProductNorm(LpNorm(2, 2), LpNorm(math.inf, 2))
        out["l1_l2_cone"] = ProductNorm(LpNorm(1, 2), LpNorm(2, 2))
    return out


@functools.lru_cache(maxsize=64)
def extreme_points(N: Norm) -> np.ndarray | None:
    """Vertices of a polyhedral unit ball, or ``None`` for non-polyhedral norms."""
    n = N.dim
    if isinstance(N, LpNorm):
        if N.p == 1:
            return np.vstack([np.eye(n), -np.eye(n)])
        if math.isinf(N.p):
            return np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
        return None
    if isinstance(N, PolytopeNorm):
        A = N.matrix
        verts = []
        for rows in itertools.combinations(range(len(A)), n):
            M = A[list(rows)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            for signs in itertools.product((-1.0, 1.0), repeat=n):
                v = np.linalg.solve(M, np.array(signs))
                if np.abs(A @ v).max() <= 1 + 1e-9:
                    verts.append(v / N(v))
        V = np.unique(np.round(np.array(verts), 12), axis=0)
        return V
    return None


def random_sphere(N: Norm, k: int, rng: np.random.Generator) -> np.ndarray:
    """Euclidean-uniform directions rescaled onto the unit sphere of ``N``.

    Not uniform in ``N``'s own geometry; good enough for audits.
    """
    g = rng.standard_normal((k, N.dim))
    return g / np.asarray(N(g))[:, None]


def random_ball(N: Norm, k: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    r = radius * rng.random(k) ** (1.0 / N.dim)
    return random_sphere(N, k, rng) * r[:, None]


# ---------------------------------------------------------------------------
# linear maps, nets, operator norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearMap:
    matrix: np.ndarray
    domain: Norm
    codomain: Norm

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionMismatchError(
                f"matrix shape {M.shape} does not match {self.codomain.dim}x{self.domain.dim}"
            )
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    def __call__(self, v):
        return np.asarray(v, dtype=float) @ self.matrix.T

    def inverse(self) -> "LinearMap":
        return LinearMap(np.linalg.inv(self.matrix), self.codomain, self.domain)

    def to_json(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "domain": self.domain.to_json(),
            "codomain": self.codomain.to_json(),
        }


@dataclass(frozen=True, eq=False)
class SphereNet:
    points: np.ndarray
    epsilon: float
    norm: Norm
    audited_radius: float
    has_extreme_points: bool = False

    def __len__(self) -> int:
        return len(self.points)


def _covering_radius(N: Norm, net: np.ndarray, probe: np.ndarray, chunk: int = 2048) -> float:
    worst = 0.0
    for s in range(0, len(probe), chunk):
        q = probe[s : s + chunk]
        d = np.asarray(N(q[:, None, :] - net[None, :, :])).min(axis=1)
        worst = max(worst, float(d.max()))
    return worst


def _candidate_pool(N: Norm, eps: float, rng: np.random.Generator, size: int | None) -> np.ndarray:
    """Quasi-uniform Euclidean directions (angle grid in 2-D, Fibonacci sphere in
    3-D, Gaussian otherwise), randomly rotated and rescaled onto ``N``'s sphere."""
    n = N.dim
    if n == 2:
        k = size or max(2000, int(200 / eps))
        t = 2 * np.pi * (np.arange(k) + rng.random()) / k
        g = np.column_stack([np.cos(t), np.sin(t)])
    elif n == 3:
        k = size or max(4000, int(120 / eps**2))
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        phi = np.pi * (1 + 5**0.5) * i
        rho = np.sqrt(1 - z * z)
        g = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        g = g @ q.T
    else:
        k = size or int(min(200_000, max(4000, 20 * (4.0 / eps) ** (n - 1))))
        g = rng.standard_normal((k, n))
    return g / np.asarray(N(g))[:, None]


def default_net_eps(dim: int) -> float:
    return {1: 0.05, 2: 0.05, 3: 0.15}.get(dim, 0.25)


@functools.lru_cache(maxsize=32)
def sphere_net(
    N: Norm,
    eps: float,
    seed: int = 0,
    pool_size: int | None = None,
    audit_size: int = 10_000,
) -> SphereNet:
    """Greedy farthest-point ``eps``-net of the unit sphere of ``N``.

    The net is seeded with the normalised signed basis vectors and, for
    polyhedral norms, every vertex of the unit ball; it then grows by
    farthest-point insertion from a seeded quasi-uniform pool until the pool is
    covered within ``3 eps / 4``. The covering radius is audited against
    ``audit_size`` fresh sphere points; failure raises
    :class:`NetTooCoarseError` carrying the achieved radius.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    n = N.dim
    if n == 1:
        e = np.array([[1.0]]) / N([1.0])
        pts = np.vstack([e, -e])
        pts.setflags(write=False)
        return SphereNet(pts, eps, N, 0.0, True)

    rng = np.random.default_rng([seed, 0x5E7])
    basis = np.vstack([np.eye(n), -np.eye(n)])
    seeds = [basis / np.asarray(N(basis))[:, None]]
    verts = extreme_points(N)
    if verts is not None:
        seeds.append(verts)
    net = np.unique(np.round(np.vstack(seeds), 14), axis=0)
    net = net / np.asarray(N(net))[:, None]

    pool = _candidate_pool(N, eps, rng, pool_size)
    mind = np.full(len(pool), np.inf)
    for p in net:
        mind = np.minimum(mind, N(pool - p))
    chosen = [net]
    target = 0.75 * eps
    while mind.max() > target:
        k = int(np.argmax(mind))
        p = pool[k]
        chosen.append(p[None, :])
        mind = np.minimum(mind, N(pool - p))
    pts = np.vstack(chosen)

    audit = random_sphere(N, audit_size, np.random.default_rng([seed, 0xA0D1]))
    radius = _covering_radius(N, pts, audit)
    if radius > eps:
        raise NetTooCoarseError(eps, radius)
    pts.setflags(write=False)
    return SphereNet(pts, eps, N, radius, verts is not None)


def operator_norm(T: LinearMap, net: SphereNet) -> tuple[float, float]:
    """Bracket ``||T||`` from a sphere net of the domain.

    ``lower`` is the max of ``||T p||`` over the net. If the net contains every
    extreme point of a polyhedral unit ball, the max over the ball is attained
    at a vertex and ``upper = lower``; otherwise ``upper = lower (1+e)/(1-e)``.
    For Euclidean domain and codomain the largest singular value is checked
    against the bracket.
    """
    if net.norm != T.domain:
        raise DimensionMismatchError("net is not on the domain sphere of T")
    if net.epsilon >= 1:
        raise ValueError("net eps must be < 1 for an operator norm bound")
    lower = float(np.max(T.codomain(T(net.points))))
    if net.has_extreme_points:
        upper = lower
    else:
        upper = lower * (1 + net.epsilon) / (1 - net.epsilon)
    if (
        isinstance(T.domain, LpNorm)
        and isinstance(T.codomain, LpNorm)
        and T.domain.p == 2
        and T.codomain.p == 2
    ):
        sigma = float(np.linalg.svd(T.matrix, compute_uv=False)[0])
        if not (lower <= sigma * (1 + 1e-12) + 1e-15 and sigma <= upper * (1 + 1e-12) + 1e-15):
            raise RuntimeError(f"net bracket [{lower}, {upper}] misses spectral norm {sigma}")
    return lower, upper


# ---------------------------------------------------------------------------
# Banach-Mazur distance
# ---------------------------------------------------------------------------


@dataclass
class BMEstimate:
    """Multi-start upper estimate of ``d_BM(V, W) = log inf ||T|| ||T^-1||``.

    ``value`` uses net lower bounds of both operator norms; ``upper`` adds the
    net-induced error bar, so ``d_BM <= upper`` whenever the nets are sound.
    """

    value: float
    witness: LinearMap | None
    error_bar: float
    restarts: int
    restart_values: list[float] = field(default_factory=list)

    @property
    def upper(self) -> float:
        return self.value + self.error_bar

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "upper": self.upper,
            "error_bars": {"net": self.error_bar},
            "restarts": self.restarts,
            "restart_values": self.restart_values,
            "witness": None if self.witness is None else self.witness.to_json(),
        }


def _net_error(net: SphereNet) -> float:
    if net.has_extreme_points:
        return 0.0
    return math.log((1 + net.epsilon) / (1 - net.epsilon))


def _random_start(n: int, rng: np.random.Generator) -> np.ndarray:
    for _ in range(100):
        M = rng.standard_normal((n, n))
        if np.linalg.cond(M) < 1e3:
            return M / abs(np.linalg.det(M)) ** (1.0 / n)
    raise RuntimeError("could not draw a well-conditioned start")


def banach_mazur_estimate(
    V: Norm,
    W: Norm,
    restarts: int = 8,
    seed: int = 0,
    net_eps: float | None = None,
    iterations: int = 200,
) -> BMEstimate:
    """Upper estimate of the Banach-Mazur distance between two norms on ``R^n``.

    Restart 0 starts at the identity; the others at seeded random invertible
    matrices normalised to unit determinant. Each restart runs the shared
    perturbation descent on ``log(||T|| ||T^-1||)`` with both operator norms
    taken as net maxima. Restarts are merged by minimum value, ties by lowest
    restart index, so threaded and sequential runs agree.
    """
    if V.dim != W.dim:
        return BMEstimate(math.inf, None, 0.0, 0)
    n = V.dim
    if net_eps is None:
        net_eps = default_net_eps(n)
    net_v = sphere_net(V, net_eps, seed)
    net_w = sphere_net(W, net_eps, seed + 1)
    PV, PW = net_v.points, net_w.points

    def objective(M: np.ndarray) -> float:
        det = np.linalg.det(M)
        if not np.isfinite(det) or abs(det) < 1e-12 * max(1.0, np.abs(M).max()) ** n:
            return math.inf
        inv = np.linalg.inv(M)
        a = np.max(W._eval(PV @ M.T))
        b = np.max(V._eval(PW @ inv.T))
        return math.log(a) + math.log(b)

    def run(k: int) -> tuple[float, np.ndarray]:
        rng = restart_rng(seed, k)
        M0 = np.eye(n) if k == 0 else _random_start(n, rng)
        res = perturbation_descent(
            objective, M0, 0.25, iterations=iterations, min_step=1e-9, rng=rng
        )
        M = res.x / abs(np.linalg.det(res.x)) ** (1.0 / n)
        return res.value, M

    results = ordered_map(run, range(max(1, restarts)))
    values = [float(v) for v, _ in results]
    if all(not math.isfinite(v) for v in values):
        raise RuntimeError("every restart produced a singular matrix")
    best = min(range(len(values)), key=lambda k: (values[k], k))
    witness = LinearMap(results[best][1], V, W)
    return BMEstimate(
        values[best],
        witness,
        _net_error(net_v) + _net_error(net_w),
        len(values),
        values,
    )


# ---------------------------------------------------------------------------
# Kadets / GH reporting
# ---------------------------------------------------------------------------


def _sampled_ball_space(N: Norm, pts: np.ndarray) -> FiniteMetricSpace:
    D = np.asarray(N(pts[:, None, :] - pts[None, :, :]))
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return FiniteMetricSpace(None, D)


def kadets_gh_relation_report(
    V: Norm,
    W: Norm,
    sample: int = 16,
    seed: int = 0,
    budget: int = DEFAULT_NODE_BUDGET // 20,
    bm_restarts: int = 4,
) -> dict:
    """Bracket ``d_GH`` between finite samples of the unit balls ``B_V``, ``B_W``.

    Both balls are sampled from the same seeded direction/radius draws, so
    ``V = W`` gives identical samples. The sampled interval is widened by the
    audited sample covering radii to give a rough interval for the balls
    themselves. For context, a linear ``T`` with ``||T^-1|| = 1`` and
    ``||T|| = e^d`` maps ``B_V`` onto a set within ``e^d - 1`` of ``B_W`` with
    distortion at most ``2(e^d - 1)``, so ``d_GH(B_V, B_W) <= 2(e^{d_BM} - 1)``.
    ``d_K`` itself is not computed.
    """
    if V.dim > 3 or W.dim > 3:
        raise ValueError("dimensions above 3 are out of scope for this report")
    if not 2 <= sample <= 64:
        raise ValueError("sample size must be in 2..64")
    g = np.random.default_rng([seed, 0xBA11]).standard_normal((sample, max(V.dim, W.dim)))
    r = np.random.default_rng([seed, 0xBA12]).random(sample)

    def draw(N: Norm) -> np.ndarray:
        dirs = g[:, : N.dim] / np.asarray(N(g[:, : N.dim]))[:, None]
        return dirs * (r ** (1.0 / N.dim))[:, None]

    pv, pw = draw(V), draw(W)
    SV, SW = _sampled_ball_space(V, pv), _sampled_ball_space(W, pw)
    gh = gh_branch_and_bound(SV, SW, budget=budget)

    audit_rng = np.random.default_rng([seed, 0xA0D2])
    cover_v = _covering_radius(V, pv, random_ball(V, 2000, audit_rng))
    cover_w = _covering_radius(W, pw, random_ball(W, 2000, audit_rng))

    bm = banach_mazur_estimate(V, W, restarts=bm_restarts, seed=seed) if V.dim == W.dim else None
    bm_value = math.inf if bm is None else bm.value
    context = 2 * math.expm1(bm_value) if math.isfinite(bm_value) else math.inf
    return {
        "V": V.to_json(),
        "W": W.to_json(),
        "sample": sample,
        "seed": seed,
        "gh_lower": gh.lower_bound,
        "gh_upper": gh.upper_bound,
        "gh_exact": gh.exact,
        "ball_gh_lower": max(0.0, gh.lower_bound - cover_v - cover_w),
        "ball_gh_upper": gh.upper_bound + cover_v + cover_w,
        "bm_estimate": bm_value,
        "bm_gh_upper_context": context,
        "error_bars": {
            "sample_cover_v": cover_v,
            "sample_cover_w": cover_w,
            "bm_net": 0.0 if bm is None else bm.error_bar,
        },
        "kadets_distance": None,
    }
