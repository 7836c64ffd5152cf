"""Benchmark sampling and trimming tools."""
from __future__ import annotations

from typing import Any, Dict

from ..bayes import check_trim_bounds
from ..errors import LabError, describe
from ..measures import BENCHMARK_KINDS, BenchmarkDist, moment, sample_benchmark


def sample(kind: str, n: int = 100, seed: int = 0, scale: float = 1.0) -> Dict[str, Any]:
    """Draw points from a named 2D benchmark distribution."""
    try:
        cloud = sample_benchmark(BenchmarkDist(kind, scale=float(scale)), int(n), int(seed))
        return {
            "status": "success",
            "kind": kind,
            "n": cloud.size,
            "points": cloud.points.tolist(),
            "second_moment": moment(cloud, 2),
        }
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


def trim_bounds(kind: str, r: float, mode: str = "posterior", n: int = 1000, seed: int = 0) -> Dict[str, Any]:
    """Distance between a benchmark sample and its trimmed version against the tail bound."""
    try:
        cloud = sample_benchmark(BenchmarkDist(kind), int(n), int(seed))
        lhs, rhs, holds = check_trim_bounds(cloud, float(r), mode)
        return {"status": "success", "kind": kind, "mode": mode, "r": float(r),
                "lhs": lhs, "rhs": rhs, "holds": holds}
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


SAMPLE_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "kind": {"type": "string", "enum": list(BENCHMARK_KINDS), "description": "Benchmark distribution."},
        "n": {"type": "integer", "description": "Number of points.", "default": 100, "minimum": 1,
              "maximum": 100000},
        "seed": {"type": "integer", "description": "Random seed.", "default": 0, "minimum": 0},
        "scale": {"type": "number", "description": "Multiplier applied to every sample.", "default": 1.0},
    },
    "required": ["kind"],
}

TRIM_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "kind": {"type": "string", "enum": list(BENCHMARK_KINDS), "description": "Benchmark distribution."},
        "r": {"type": "number", "description": "Trim radius.", "exclusiveMinimum": 0},
        "mode": {"type": "string", "enum": ["prior", "posterior"], "default": "posterior"},
        "n": {"type": "integer", "default": 1000, "minimum": 1, "maximum": 5000},
        "seed": {"type": "integer", "default": 0, "minimum": 0},
    },
    "required": ["kind", "r"],
}
