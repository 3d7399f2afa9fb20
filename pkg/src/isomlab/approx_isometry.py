"""Explicit epsilon-isometries and recovery of approximating linear isometries.

Maps here are plain vectorised callables ``f(points) -> images`` acting on the
last axis. The central constructions:

* :func:`make_f_phi` -- ``v -> (v, phi(||v||))`` into the product space
  ``V + R`` with norm ``||(v, t)|| = ||(||v||_V, t)||_plane``;
* :func:`hyers_ulam_recover` -- ``U e_i = lim f(s e_i) / s`` along a scale
  schedule, with linearity/isometry/convergence diagnostics;
* :func:`bound_check` -- sampled ``sup ||f(v) - U v||`` against the classical
  constants ``10e``, ``12e + 5d``, ``2e + 2d``, ``5e`` and ``2e``;
* :func:`borsuk_witness` -- antipodal points with nearly equal images, which
  certify ``dis f >= 2R - gap``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .descent import perturbation_descent
from .normed_spaces import (
    LinearMap,
    LpNorm,
    Norm,
    ProductNorm,
    SphereNet,
    norm_from_json,
    random_ball,
)

__all__ = [
    "SampledMap",
    "EpsIsometryReport",
    "BoundCheck",
    "PhiMap",
    "NoisyLinearMap",
    "AffineSubspace",
    "RecoveryDiagnostics",
    "PHI_NAMES",
    "make_phi",
    "make_f_phi",
    "sample_map",
    "sampled_distortion",
    "validate_eps_isometry",
    "certify_eps",
    "delta_surjectivity",
    "probe_set",
    "hyers_ulam_recover",
    "bound_check",
    "borsuk_witness",
    "affine_deviation",
    "map_from_json",
]

PHI_NAMES = ("abs", "sqrt_scaled", "zero", "table")

# name, theorem, constant as a function of (eps, delta)
BOUND_CONSTANTS: tuple[tuple[str, str, Callable[[float, float], float]], ...] = (
    ("10eps", "Hyers-Ulam (surjective, Euclidean)", lambda e, d: 10 * e),
    ("12eps+5delta", "Dilworth (delta-surjective onto a closed subspace)", lambda e, d: 12 * e + 5 * d),
    ("2eps+2delta", "Semrl-Vaisala (delta-surjective)", lambda e, d: 2 * e + 2 * d),
    ("5eps", "Gruber (surjective, approximating isometry exists)", lambda e, d: 5 * e),
    ("2eps", "Omladic-Semrl (surjective, sharp)", lambda e, d: 2 * e),
)


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------


@dataclass
class SampledMap:
    domain_points: np.ndarray
    image_points: np.ndarray
    source: str = "data"

    def __post_init__(self):
        self.domain_points = np.atleast_2d(np.asarray(self.domain_points, dtype=float))
        self.image_points = np.atleast_2d(np.asarray(self.image_points, dtype=float))
        if len(self.domain_points) != len(self.image_points):
            raise ValueError("domain and image samples differ in length")

    def __len__(self) -> int:
        return len(self.domain_points)


def sample_map(f: Callable, points, source: str | None = None) -> SampledMap:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    name = source or f"explicit-formula({getattr(f, 'name', getattr(f, '__name__', 'f'))})"
    return SampledMap(pts, f(pts), name)


def make_phi(name: str, eps: float | None = None, table=None) -> Callable[[np.ndarray], np.ndarray]:
    if name == "abs":
        return np.abs
    if name == "zero":
        return np.zeros_like
    if name == "sqrt_scaled":
        if eps is None or not eps > 0:
            raise ValueError("sqrt_scaled needs eps > 0")
        return lambda t: np.sqrt(eps * np.maximum(t, 0.0))
    if name == "table":
        knots = np.asarray(table, dtype=float)
        if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) < 2:
            raise ValueError("table needs at least two (t, phi) knots")
        knots = knots[np.argsort(knots[:, 0])]
        return lambda t: np.interp(t, knots[:, 0], knots[:, 1])
    raise ValueError(f"unknown phi {name!r}; expected one of {PHI_NAMES}")


@dataclass(frozen=True, eq=False)
class PhiMap:
    """``v -> (v, scale * phi(||v||_V))`` into ``ProductNorm(V, plane)``."""

    V: Norm
    plane: Norm
    phi_name: str
    phi: Callable
    params: dict = field(default_factory=dict)
    scale: float = 1.0

    @property
    def codomain(self) -> ProductNorm:
        return ProductNorm(self.V, self.plane)

    @property
    def name(self) -> str:
        return f"f_phi[{self.phi_name}]"

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        t = self.scale * self.phi(np.asarray(self.V(v)))
        return np.concatenate([v, np.asarray(t, dtype=float)[..., None]], axis=-1)

    def rescaled(self, factor: float) -> "PhiMap":
        return PhiMap(self.V, self.plane, self.phi_name, self.phi, self.params, self.scale * factor)

    def to_json(self) -> dict:
        out = {"map": "f_phi", "phi": self.phi_name, "V": self.V.to_json(), "plane": self.plane.to_json()}
        out.update(self.params)
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out


def make_f_phi(V: Norm, plane: Norm, phi: str = "abs", eps: float | None = None, table=None) -> PhiMap:
    fn = make_phi(phi, eps=eps, table=table)
    params = {}
    if eps is not None:
        params["eps"] = eps
    if table is not None:
        params["table"] = [list(map(float, r)) for r in table]
    return PhiMap(V, plane, phi, fn, params)


@dataclass(frozen=True, eq=False)
class NoisyLinearMap:
    """``v -> T v + n(v)`` with a deterministic seeded perturbation ``||n(v)||_W <= bound``."""

    T: LinearMap
    bound: float
    seed: int = 0

    @property
    def name(self) -> str:
        return "noisy_linear"

    @property
    def codomain(self) -> Norm:
        return self.T.codomain

    def noise(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        rng = np.random.default_rng([self.seed, 0x0153])
        m, d = self.T.codomain.dim, self.T.domain.dim
        A = rng.standard_normal((m, d)) * 3.0
        b = rng.uniform(0, 2 * np.pi, m)
        raw = np.sin(v @ A.T + b)
        scale = np.maximum(1.0, np.asarray(self.T.codomain(raw)))
        return self.bound * raw / np.asarray(scale)[..., None]

    def __call__(self, v):
        return self.T(v) + self.noise(v)

    def to_json(self) -> dict:
        return {
            "map": "noisy_linear",
            "matrix": self.T.matrix.tolist(),
            "V": self.T.domain.to_json(),
            "W": self.T.codomain.to_json(),
            "noise": self.bound,
            "seed": self.seed,
        }


def map_from_json(data: dict):
    """Build ``(f, V, W)`` from a map formula description."""
    kind = data.get("map")
    if kind == "f_phi":
        V = norm_from_json(data["V"])
        plane = norm_from_json(data["plane"])
        f = make_f_phi(V, plane, data["phi"], eps=data.get("eps"), table=data.get("table"))
        if "scale" in data:
            f = f.rescaled(float(data["scale"]))
        return f, V, f.codomain
    if kind in ("linear", "noisy_linear"):
        V = norm_from_json(data["V"])
        W = norm_from_json(data["W"])
        T = LinearMap(np.array(data["matrix"], dtype=float), V, W)
        if kind == "linear":
            return T, V, W
        return NoisyLinearMap(T, float(data["noise"]), int(data.get("seed", 0))), V, W
    raise ValueError(f"unknown map kind {kind!r}")


# ---------------------------------------------------------------------------
# sampled distortion and surjectivity
# ---------------------------------------------------------------------------


def sampled_distortion(f: SampledMap, V: Norm, W: Norm, pairs=None) -> float:
    """``max | ||f v - f u||_W - ||v - u||_V |`` over sampled pairs.

    All pairs by default, or the ``(K, 2)`` index array ``pairs``. This is a
    lower bound for the true distortion.
    """
    P, Q = f.domain_points, f.image_points
    if len(P) < 2:
        raise ValueError("need at least two sampled points")
    if pairs is None:
        i, j = np.triu_indices(len(P), 1)
    else:
        pairs = np.asarray(pairs, dtype=int)
        i, j = pairs[:, 0], pairs[:, 1]
    worst = 0.0
    for s in range(0, len(i), 200_000):
        a, b = i[s : s + 200_000], j[s : s + 200_000]
        gap = np.abs(np.asarray(W(Q[a] - Q[b])) - np.asarray(V(P[a] - P[b])))
        worst = max(worst, float(gap.max()))
    return worst


def validate_eps_isometry(
    f: Callable,
    V: Norm,
    W: Norm,
    radius: float = 1e3,
    n_pairs: int = 20_000,
    seed: int = 0,
) -> float:
    """Dense-sampling distortion oracle over pairs at every scale up to ``radius``.

    Base points are drawn with log-uniform norm in ``[1e-3, radius]`` and each
    is paired with a neighbour at log-uniform offset in ``[1e-4, radius]`` plus
    its antipode, so both short and long pairs are exercised.
    """
    rng = np.random.default_rng([seed, 0xDE5E])
    n = V.dim
    r = np.exp(rng.uniform(np.log(1e-3), np.log(radius), n_pairs))
    base = random_ball(V, n_pairs, rng, 1.0)
    base = base / np.maximum(np.asarray(V(base)), 1e-300)[:, None] * r[:, None]
    off = np.exp(rng.uniform(np.log(1e-4), np.log(radius), n_pairs))
    dirs = rng.standard_normal((n_pairs, n))
    dirs /= np.asarray(V(dirs))[:, None]
    other = base + dirs * off[:, None]
    pts = np.vstack([base, other, -base, np.zeros((1, n))])
    k = np.arange(n_pairs)
    pairs = np.concatenate(
        [
            np.column_stack([k, k + n_pairs]),
            np.column_stack([k, k + 2 * n_pairs]),
            np.column_stack([k, np.full(n_pairs, 3 * n_pairs)]),
        ]
    )
    return sampled_distortion(sample_map(f, pts), V, W, pairs=pairs)


def certify_eps(
    f: PhiMap,
    eps: float,
    radius: float = 1e3,
    n_pairs: int = 20_000,
    seed: int = 0,
) -> tuple[PhiMap, float, float]:
    """Audit ``dis f <= eps`` densely; if it fails, shrink ``phi`` until it passes.

    Returns ``(f', factor, measured)`` where ``f' = f.rescaled(factor)`` and
    ``measured`` is the audited distortion of ``f'``. Each failed audit
    multiplies ``phi`` by ``eps / measured`` (capped at 1/2).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    factor = 1.0
    g = f
    for _ in range(60):
        measured = validate_eps_isometry(g, f.V, f.codomain, radius, n_pairs, seed)
        if measured <= eps:
            return g, factor, measured
        factor *= min(0.5, eps / measured)
        g = f.rescaled(factor)
    raise RuntimeError("could not bring the sampled distortion below eps")


def delta_surjectivity(f: SampledMap, target_sample, W: Norm) -> float:
    """``max_t min_i ||t - f(v_i)||_W`` over the target sample (a lower bound for delta)."""
    T = np.atleast_2d(np.asarray(target_sample, dtype=float))
    if len(f.image_points) == 0 or T.size == 0:
        raise ValueError("delta_surjectivity needs non-empty image and target samples")
    worst = 0.0
    for s in range(0, len(T), 1024):
        d = np.asarray(W(T[s : s + 1024, None, :] - f.image_points[None, :, :]))
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def probe_set(V: Norm, radius: float, sample: int = 512, seed: int = 0) -> np.ndarray:
    """Seeded uniform points in the radius-``R`` ball plus the signed basis at norm 1 and ``R``."""
    rng = np.random.default_rng([seed, 0x9B0E])
    n = V.dim
    basis = np.vstack([np.eye(n), -np.eye(n)])
    basis = basis / np.asarray(V(basis))[:, None]
    extra = np.vstack([basis, radius * basis])
    k = max(0, sample - len(extra))
    return np.vstack([extra, random_ball(V, k, rng, radius)])


# ---------------------------------------------------------------------------
# recovery of the linear isometry
# ---------------------------------------------------------------------------


@dataclass
class RecoveryDiagnostics:
    translation: np.ndarray
    scales: np.ndarray
    convergence: np.ndarray  # (len(scales), dim V): ||g(s e_i)/s - U e_i||
    cauchy: np.ndarray  # (len(scales)-1, dim V): successive differences
    linearity_residual: float
    isometry_residual: float
    divergent: bool

    def to_json(self) -> dict:
        return {
            "translation": self.translation.tolist(),
            "scales": self.scales.tolist(),
            "convergence": self.convergence.tolist(),
            "cauchy": self.cauchy.tolist(),
            "linearity_residual": self.linearity_residual,
            "isometry_residual": self.isometry_residual,
            "divergent": self.divergent,
        }


def _default_scales() -> np.ndarray:
    return 2.0 ** np.arange(1, 21)


def hyers_ulam_recover(
    f: Callable,
    V: Norm,
    W: Norm,
    scales=None,
    probes=None,
    seed: int = 0,
) -> tuple[LinearMap, RecoveryDiagnostics]:
    """Estimate the linear isometry approximating ``f`` by ``U v = lim g(s v) / s``.

    ``g = f - f(0)``. Columns of ``U`` are ``g(s e_i) / s`` at the largest
    scale. Diagnostics:

    * ``linearity_residual``: max over probe pairs of
      ``||L(u + v) - L(u) - L(v)||`` where ``L(v) = g(s v) / s`` at the
      largest scale (the limit map itself, not the matrix);
    * ``isometry_residual``: max over probes of ``| ||U v|| - ||v|| |`` for unit probes;
    * ``convergence``: ``||g(s e_i)/s - U e_i||`` for every tabulated scale;
    * ``divergent``: the successive differences fail to decrease.
    """
    s = _default_scales() if scales is None else np.asarray(scales, dtype=float)
    if len(s) < 3 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise ValueError("scales must be >= 3 strictly increasing positive values")
    n = V.dim
    f0 = np.asarray(f(np.zeros((1, n))))[0]

    def g(x):
        return np.asarray(f(x)) - f0

    E = np.eye(n)
    table = np.stack([g(si * E) / si for si in s])  # (k, n, m)
    U = LinearMap(table[-1].T, V, W)
    conv = np.stack([np.asarray(W(table[k] - table[-1])) for k in range(len(s))])
    cauchy = np.stack([np.asarray(W(table[k + 1] - table[k])) for k in range(len(s) - 1)])
    scale_tol = 1e-12 * max(1.0, float(np.abs(table[-1]).max()))
    tail = cauchy.max(axis=1)
    divergent = bool(tail[-1] > scale_tol and tail[-1] >= tail[0])

    if probes is None:
        probes = probe_set(V, 1.0, 64, seed)
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    big = s[-1]
    half = len(P) // 2 or 1
    u, v = P[:half], P[half : 2 * half] if len(P) >= 2 else P[:half]
    lin = g(big * (u + v)) / big - g(big * u) / big - g(big * v) / big
    linearity = float(np.max(W(lin))) if len(lin) else 0.0
    unit = P / np.maximum(np.asarray(V(P)), 1e-300)[:, None]
    iso = float(np.max(np.abs(np.asarray(W(U(unit))) - 1.0)))
    diag = RecoveryDiagnostics(f0, s, conv, cauchy, linearity, iso, divergent)
    return U, diag


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------


@dataclass
class BoundCheck:
    name: str
    theorem: str
    M: float
    satisfied: bool
    max_residual: float

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "theorem": self.theorem,
            "M": self.M,
            "satisfied": self.satisfied,
            "max_residual": self.max_residual,
        }


@dataclass
class EpsIsometryReport:
    eps: float
    delta: float
    eps_observed: float
    delta_observed: float
    max_residual: float
    radius: float
    bound_checks: list[BoundCheck]
    vacuous: bool
    translation: np.ndarray

    def check(self, name: str) -> BoundCheck:
        for c in self.bound_checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "eps": self.eps,
            "delta": self.delta,
            "eps_observed": self.eps_observed,
            "delta_observed": self.delta_observed,
            "max_residual": self.max_residual,
            "radius": self.radius,
            "vacuous": self.vacuous,
            "translation": self.translation.tolist(),
            "bound_checks": [c.to_json() for c in self.bound_checks],
        }


def bound_check(
    f: Callable,
    U: LinearMap,
    eps: float,
    delta: float | None = None,
    radius: float = 10.0,
    sample: int = 512,
    seed: int = 0,
) -> EpsIsometryReport:
    """Compare ``sup_probes ||f(v) - f(0) - U v||_W`` with the classical constants.

    ``eps_observed`` is the sampled distortion of ``f`` on the probes; if it
    exceeds ``eps`` the report is flagged ``vacuous``. ``delta_observed`` is
    the sampled one-sided gap from ``U(probes)`` to ``f(probes)``; it is used
    as ``delta`` when none is supplied.
    """
    V, W = U.domain, U.codomain
    P = probe_set(V, radius, sample, seed)
    f0 = np.asarray(f(np.zeros((1, V.dim))))[0]
    images = np.asarray(f(P)) - f0
    residual = float(np.max(W(images - U(P))))
    sm = SampledMap(P, images, getattr(f, "name", "f"))
    eps_obs = sampled_distortion(sm, V, W)
    delta_obs = delta_surjectivity(sm, U(P), W)
    d = delta_obs if delta is None else float(delta)
    checks = [
        BoundCheck(name, thm, M(eps, d), residual <= M(eps, d), residual)
        for name, thm, M in BOUND_CONSTANTS
    ]
    return EpsIsometryReport(
        eps, d, eps_obs, delta_obs, residual, radius, checks, eps_obs > eps, f0
    )


# ---------------------------------------------------------------------------
# Borsuk-Ulam witnesses and affine deviation
# ---------------------------------------------------------------------------


def borsuk_witness(
    f: Callable,
    W: Norm,
    R: float,
    net: SphereNet,
    iterations: int = 400,
    seed: int = 0,
) -> tuple[np.ndarray, float, float]:
    """Find ``||v|| = R`` minimising ``||f(v) - f(-v)||_W``.

    Returns ``(v, gap, 2R - gap)``; the last value is a certified lower
    bound for ``dis f`` since ``||v - (-v)|| = 2R``.
    """
    V = net.norm
    if V.dim <= W.dim:
        raise ValueError("borsuk_witness needs dim V > dim W")
    if not R > 0:
        raise ValueError("R must be positive")

    def gap_of(x):
        x = np.atleast_2d(x)
        v = R * x / np.asarray(V(x))[:, None]
        return np.asarray(W(np.asarray(f(v)) - np.asarray(f(-v)))), v

    gaps, _ = gap_of(net.points)
    start = net.points[int(np.argmin(gaps))]

    def obj(x):
        if not np.any(x):
            return math.inf
        return float(gap_of(x)[0][0])

    res = perturbation_descent(
        obj,
        start,
        0.5 * net.epsilon,
        iterations=iterations,
        min_step=1e-15,
        rng=np.random.default_rng([seed, 0xB0B]),
        target=0.0,
    )
    gap, v = gap_of(res.x)
    gap = float(gap[0])
    return v[0], gap, 2 * R - gap


@dataclass(frozen=True, eq=False)
class AffineSubspace:
    """``offset + span(basis columns)`` inside ``W``."""

    basis: np.ndarray  # (dim W, k)
    offset: np.ndarray

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.basis, dtype=float))
        c = np.asarray(self.offset, dtype=float)
        if B.shape[0] != c.shape[0]:
            raise ValueError("basis and offset live in different dimensions")
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "offset", c)

    @classmethod
    def from_linear_map(cls, T: LinearMap, offset=None) -> "AffineSubspace":
        off = np.zeros(T.codomain.dim) if offset is None else offset
        return cls(T.matrix, off)

    @classmethod
    def coordinate_slice(cls, dim: int, fixed: int, value: float = 0.0) -> "AffineSubspace":
        """``{w : w[fixed] = value}``."""
        keep = [i for i in range(dim) if i != fixed]
        off = np.zeros(dim)
        off[fixed] = value
        return cls(np.eye(dim)[:, keep], off)


def _distance_to_subspace(W: Norm, w: np.ndarray, L: AffineSubspace, rng, iterations: int) -> float:
    B, c = L.basis, L.offset
    z0, *_ = np.linalg.lstsq(B, w - c, rcond=None)
    scale = max(1.0, float(np.asarray(W(w - c))))

    def obj(z):
        return float(W(w - c - B @ z))

    res = perturbation_descent(obj, z0, 0.25 * scale, iterations=iterations, min_step=1e-12 * scale, rng=rng)
    return res.value


def affine_deviation(
    f: Callable,
    V: Norm,
    W: Norm,
    subspace: AffineSubspace,
    radii,
    sample: int = 64,
    seed: int = 0,
    iterations: int = 200,
) -> list[tuple[float, float]]:
    """For each radius ``R``, ``sup ||v|| <= R`` of the ``W``-distance from ``f(v)`` to ``subspace``.

    Probe points are the signed basis at norm ``R`` plus a seeded ball sample;
    each distance is a descent over subspace coordinates from the
    least-squares foot point.
    """
    if subspace.basis.shape[1] >= W.dim:
        raise ValueError("subspace must have dimension below dim W")
    out = []
    for R in radii:
        P = probe_set(V, float(R), sample, seed)
        P = P[np.asarray(V(P)) <= R * (1 + 1e-12)]
        imgs = np.asarray(f(P))
        rng = np.random.default_rng([seed, 0xAFF])
        worst = max(_distance_to_subspace(W, w, subspace, rng, iterations) for w in imgs)
        out.append((float(R), float(worst)))
    return out
