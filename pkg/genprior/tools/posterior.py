"""Posterior stability tool."""
from __future__ import annotations

from typing import Any, Dict

import numpy as np

from .. import config
from ..bayes import LikelihoodSpec, stability_report
from ..errors import LabError, describe
from ..measures import BENCHMARK_KINDS, BenchmarkDist, sample_benchmark


def posterior_stability(kind: str = "swissroll", n_true: int = 2048, n_approx: int = 512,
                        sigma: float = config.LIKELIHOOD_2D_SIGMA, m_out: int = 512,
                        seed: int = 0) -> Dict[str, Any]:
    """Compare the posteriors of a large sample and a small sample of the same benchmark.

    The small sample plays the approximate prior; the report holds the prior
    W2, the posterior W1, the stability constant and the resampling noise floor.
    """
    try:
        first, second, third = np.random.SeedSequence(int(seed)).spawn(3)
        dist = BenchmarkDist(kind)
        prior_true = sample_benchmark(dist, int(n_true), first)
        prior_approx = sample_benchmark(dist, int(n_approx), second)
        spec = LikelihoodSpec.benchmark_2d(sigma=float(sigma))
        report = stability_report(prior_true, prior_approx, spec, int(m_out), third)
        return {"status": "success", "kind": kind, "sigma": float(sigma), **report.as_row()}
    except (LabError, ValueError, TypeError) as e:
        return {"status": "error", "message": describe(e)}


STABILITY_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "kind": {"type": "string", "enum": list(BENCHMARK_KINDS), "default": "swissroll"},
        "n_true": {"type": "integer", "description": "Size of the reference prior sample.", "default": 2048,
                   "minimum": 1, "maximum": 8192},
        "n_approx": {"type": "integer", "description": "Size of the approximate prior sample.", "default": 512,
                     "minimum": 1, "maximum": 8192},
        "sigma": {"type": "number", "description": "Observation noise level.", "default": 0.5},
        "m_out": {"type": "integer", "description": "Resampled posterior size.", "default": 512,
                  "minimum": 1, "maximum": 4096},
        "seed": {"type": "integer", "default": 0, "minimum": 0},
    },
}
