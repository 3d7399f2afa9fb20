"""Fixed-schedule perturbation descent shared by every optimisation here.

Each iteration tries ``x +/- step * e_i`` for every coordinate plus a few
seeded random unit directions, moves to the best strict improvement, and
halves the step when nothing improves. The schedule is deterministic for a
given ``rng`` state, which keeps every caller seed-reproducible.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    final_step: float


def perturbation_descent(
    fun: Callable[[np.ndarray], float],
    x0,
    step: float,
    *,
    iterations: int = 200,
    min_step: float = 1e-10,
    n_random: int | None = None,
    rng: np.random.Generator | None = None,
    target: float = -np.inf,
    batched: bool = False,
) -> DescentResult:
    """Minimise ``fun`` from ``x0``; stops when ``step < min_step`` or ``value <= target``.

    With ``batched=True`` ``fun`` receives a stack of candidates of shape
    ``(k, *x0.shape)`` and returns ``k`` values; the trajectory is identical
    to the one-at-a-time evaluation.
    """
    x = np.array(x0, dtype=float)
    shape = x.shape
    x = x.ravel()
    d = x.size
    if rng is None:
        rng = np.random.default_rng(0)
    if n_random is None:
        n_random = d
    fx = float(fun(x.reshape((1,) + shape))[0]) if batched else float(fun(x.reshape(shape)))
    eye = np.eye(d)
    it = 0
    for it in range(1, iterations + 1):
        if step < min_step or fx <= target:
            it -= 1
            break
        dirs = [eye, -eye]
        if n_random:
            r = rng.standard_normal((n_random, d))
            r /= np.linalg.norm(r, axis=1, keepdims=True)
            dirs.append(r)
        cands = x + step * np.vstack(dirs)
        if batched:
            vals = np.asarray(fun(cands.reshape((len(cands),) + shape)), dtype=float)
        else:
            vals = np.array([fun(c.reshape(shape)) for c in cands])
        k = int(np.argmin(vals))
        if vals[k] < fx:
            x, fx = cands[k], float(vals[k])
        else:
            step *= 0.5
    return DescentResult(x.reshape(shape), fx, it, step)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("ISOMLAB_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    """``list(map(fn, items))``, threaded when ISOMLAB_THREADS > 1; order preserved."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(restart)])
