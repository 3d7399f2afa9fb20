"""Gromov-Hausdorff distances, approximate isometries of normed spaces and finite embeddings."""
from __future__ import annotations

from .metric_core import (
    Correspondence,
    FiniteMetricSpace,
    GHResult,
    MapPair,
    MetricError,
    gh_branch_and_bound,
    gh_exact_correspondences,
    gh_exact_maps,
    gh_lower_bound,
    validate_metric,
)
from .normed_spaces import LinearMap, LpNorm, PolytopeNorm, ProductNorm, banach_mazur_estimate, sphere_net

__version__ = "0.1.0"

__all__ = [
    "Correspondence",
    "FiniteMetricSpace",
    "GHResult",
    "MapPair",
    "MetricError",
    "gh_branch_and_bound",
    "gh_exact_correspondences",
    "gh_exact_maps",
    "gh_lower_bound",
    "validate_metric",
    "LinearMap",
    "LpNorm",
    "PolytopeNorm",
    "ProductNorm",
    "banach_mazur_estimate",
    "sphere_net",
]
