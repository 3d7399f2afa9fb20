"""Experiment configuration, report rows and deterministic serialisation.

Every numeric claim becomes a :class:`Row` with a status among ``pass``,
``fail``, ``expected-fail`` (a bound that is supposed to break, e.g. for a
non-surjective map) and ``report`` (an informational number with no verdict).
Reports contain no timestamps or environment details, so identical inputs
give byte-identical output.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "STATUSES",
    "ANCHORS",
    "DEFAULT_TOLERANCES",
    "ExperimentConfig",
    "Row",
    "Report",
    "digest",
    "to_plain",
    "parse_tolerances",
]

STATUSES = ("pass", "fail", "expected-fail", "report")

# Neutral keys naming the checked mathematical statement of each row.
ANCHORS = {
    "gh-two-map-formulation": "d_GH as half the min over map pairs of max(dis f, codis, dis g)",
    "gh-correspondence-formulation": "d_GH as half the min distortion over correspondences",
    "gh-conical-scaling": "d_GH(lam X, lam Y) = lam d_GH(X, Y) for lam > 0",
    "hyers-ulam-limit": "U v = lim f(s v) / s for an eps-isometry with f(0) = 0",
    "bound-10eps": "surjective eps-isometry of Euclidean spaces: ||f - U|| <= 10 eps",
    "bound-12eps+5delta": "delta-surjective onto a closed subspace: ||f - U|| <= 12 eps + 5 delta",
    "bound-2eps+2delta": "delta-surjective eps-isometry: ||f - U|| <= 2 eps + 2 delta",
    "bound-5eps": "surjective eps-isometry: ||f - U|| <= 5 eps",
    "bound-2eps": "surjective eps-isometry: ||f - U|| <= 2 eps (sharp)",
    "banach-mazur-definition": "d_BM = log inf ||T|| ||T^-1|| over isomorphisms",
    "john-bound": "d_BM(V, l2^n) <= log sqrt(n), hence d_BM(V, W) <= log n",
    "finite-subset-embedding": "finite subsets embed isometrically into the target space",
    "frechet-embedding": "rows of the distance matrix embed a finite space into l_inf^n",
    "equilateral-cardinality": "an equilateral set in an n-dimensional normed space has <= 2^n points",
    "antipodal-collapse": "continuous f: V -> W, dim V > dim W, has ||v|| = R with f(v) = f(-v)",
}

DEFAULT_TOLERANCES = {
    "agree": 1e-12,
    "scaling": 1e-12,
    "john": 1e-2,
    "frechet": 1e-12,
    "embeddable": 1e-6,
    "certified": 1e-9,
    "borsuk": 1e-9,
}


def parse_tolerances(items) -> dict[str, float]:
    """``["name=value", ...]`` merged over the defaults; names must be known and values > 0."""
    tol = dict(DEFAULT_TOLERANCES)
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"tolerance {item!r} is not of the form name=value")
        if name not in tol:
            raise ValueError(f"unknown tolerance {name!r}; known: {sorted(tol)}")
        v = float(value)
        if not v > 0:
            raise ValueError(f"tolerance {name} must be positive")
        tol[name] = v
    return tol


@dataclass
class ExperimentConfig:
    seed: int = 0
    budget_nodes: int = 200_000
    budget_iterations: int = 200
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str | None = None
    format: str = "json"

    def __post_init__(self):
        if self.format not in ("json", "csv"):
            raise ValueError(f"unknown format {self.format!r}")
        for k, v in self.tolerances.items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive")
        if self.budget_nodes < 1 or self.budget_iterations < 1:
            raise ValueError("budgets must be positive")

    def echo(self) -> dict:
        # the output path is deliberately not echoed: moving a report must not change it
        return {
            "seed": self.seed,
            "budget_nodes": self.budget_nodes,
            "budget_iterations": self.budget_iterations,
            "tolerances": dict(self.tolerances),
            "format": self.format,
        }


@dataclass
class Row:
    claim: str
    anchor: str
    value: Any
    tolerance: float | None
    status: str

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status {self.status!r}")
        if self.anchor not in ANCHORS:
            raise ValueError(f"unknown anchor {self.anchor!r}")

    def to_json(self) -> dict:
        return {
            "claim": self.claim,
            "anchor": self.anchor,
            "value": self.value,
            "tolerance": self.tolerance,
            "status": self.status,
        }


def to_plain(obj):
    """Recursively convert numpy values to JSON-safe Python; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def digest(data) -> str:
    blob = json.dumps(to_plain(data), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def check(claim: str, anchor: str, ok: bool, value, tolerance) -> Row:
    return Row(claim, anchor, value, tolerance, "pass" if ok else "fail")


@dataclass
class Report:
    experiment: str
    config: ExperimentConfig
    instances: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)

    def add(self, row: Row) -> Row:
        self.rows.append(row)
        return row

    @property
    def failed(self) -> bool:
        return any(r.status == "fail" for r in self.rows)

    @property
    def exit_code(self) -> int:
        return 3 if self.failed else 0

    def to_json(self) -> dict:
        return to_plain(
            {
                "experiment": self.experiment,
                "inputs": {
                    "config": self.config.echo(),
                    "instances": {k: digest(v) for k, v in self.instances.items()},
                },
                "results": self.results,
                "provenance": {r.anchor: ANCHORS[r.anchor] for r in self.rows},
                "rows": [r.to_json() for r in self.rows],
            }
        )

    def dumps(self, fmt: str | None = None) -> str:
        fmt = fmt or self.config.format
        if fmt == "json":
            return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "claim", "anchor", "value", "tolerance", "status"])
        for r in self.to_json()["rows"]:
            w.writerow(
                [
                    self.experiment,
                    r["claim"],
                    r["anchor"],
                    json.dumps(r["value"]) if not isinstance(r["value"], str) else r["value"],
                    "" if r["tolerance"] is None else repr(r["tolerance"]),
                    r["status"],
                ]
            )
        return buf.getvalue()
