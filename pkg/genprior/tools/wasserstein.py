"""Optimal transport tools: exact W_p and the Sinkhorn divergence."""
from __future__ import annotations

from typing import Any, Dict, List, Optional

import numpy as np

from .. import config
from ..errors import LabError, describe
from ..measures import PointCloud
from ..ot import OtConfig, exact_wp, sinkhorn_divergence


def _cloud(points: List[List[float]], weights: Optional[List[float]]) -> PointCloud:
    if weights is None:
        return PointCloud.uniform(points)
    return PointCloud.from_weights(points, weights)


def wasserstein(points_a: List[List[float]], points_b: List[List[float]],
                weights_a: Optional[List[float]] = None, weights_b: Optional[List[float]] = None,
                p: int = 2) -> Dict[str, Any]:
    """Exact Wasserstein-p distance between two weighted point clouds.

    Args:
        points_a: Support points of the first cloud
        points_b: Support points of the second cloud
        weights_a: Optional weights of the first cloud (uniform when omitted)
        weights_b: Optional weights of the second cloud (uniform when omitted)
        p: Ground cost power, 1 or 2

    Returns:
        A dictionary with the distance or an error message
    """
    try:
        a, b = _cloud(points_a, weights_a), _cloud(points_b, weights_b)
        distance, plan = exact_wp(a, b, int(p))
        return {
            "status": "success",
            "distance": distance,
            "p": int(p),
            "n_a": a.size,
            "n_b": b.size,
            "marginal_violation": plan.marginal_violation,
        }
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


def sinkhorn(points_a: List[List[float]], points_b: List[List[float]],
             epsilon: float = config.SINKHORN_EPSILON) -> Dict[str, Any]:
    """Debiased Sinkhorn divergence between two uniform clouds."""
    try:
        a, b = PointCloud.uniform(points_a), PointCloud.uniform(points_b)
        value, grad = sinkhorn_divergence(a, b, OtConfig.sinkhorn(float(epsilon)))
        return {
            "status": "success",
            "divergence": value,
            "epsilon": float(epsilon),
            "gradient_norm": float(np.linalg.norm(grad)),
        }
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


_POINTS_SCHEMA: Dict[str, Any] = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "number"}},
}

WASSERSTEIN_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "points_a": {**_POINTS_SCHEMA, "description": "Points of the first cloud, one list per point."},
        "points_b": {**_POINTS_SCHEMA, "description": "Points of the second cloud, one list per point."},
        "weights_a": {"type": "array", "items": {"type": "number"}, "description": "Weights of the first cloud."},
        "weights_b": {"type": "array", "items": {"type": "number"}, "description": "Weights of the second cloud."},
        "p": {"type": "integer", "description": "Ground cost power.", "default": 2, "enum": [1, 2]},
    },
    "required": ["points_a", "points_b"],
}

SINKHORN_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "points_a": {**_POINTS_SCHEMA, "description": "Points of the first cloud."},
        "points_b": {**_POINTS_SCHEMA, "description": "Points of the second cloud."},
        "epsilon": {"type": "number", "description": "Entropic regularisation.",
                    "default": config.SINKHORN_EPSILON},
    },
    "required": ["points_a", "points_b"],
}
