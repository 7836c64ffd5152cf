"""Darcy forward map tool."""
from __future__ import annotations

from typing import Any, Dict, List, Optional

import numpy as np

from .. import config
from ..darcy import DarcyConfig, default_observation_points, forward_map
from ..errors import LabError, describe


def darcy_forward(m: int = config.DARCY_GRID_SIZE, u: Optional[List[float]] = None,
                  observation_count: int = 20, seed: int = config.DARCY_OBSERVATION_SEED) -> Dict[str, Any]:
    """Pressure at random interior points for a log-permeability field (zero when omitted)."""
    try:
        m = int(m)
        field = np.zeros(m * m) if u is None else np.asarray(u, dtype=np.float64)
        points = default_observation_points(int(observation_count), int(seed))
        values = forward_map(field, DarcyConfig(m=m, points=points))
        return {
            "status": "success",
            "m": m,
            "points": points.tolist(),
            "values": values.tolist(),
            "max_value": float(values.max()),
        }
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


DARCY_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "m": {"type": "integer", "description": "Grid nodes per side.", "default": 16, "minimum": 3,
              "maximum": 128},
        "u": {"type": "array", "items": {"type": "number"},
              "description": "Row-major log-permeability values (m*m entries)."},
        "observation_count": {"type": "integer", "default": 20, "minimum": 1, "maximum": 1000},
        "seed": {"type": "integer", "default": 2718, "minimum": 0},
    },
}
