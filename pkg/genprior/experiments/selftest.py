"""Exact OT oracle suite behind ``ot selftest``."""
from __future__ import annotations

import logging
from typing import Any, Dict

import numpy as np

from ..measures import PointCloud, make_rng
from ..ot import brute_force_wp, exact_wp

logger = logging.getLogger(__name__)


def _random_cloud(rng: np.random.Generator, n: int, dim: int = 2) -> PointCloud:
    return PointCloud.uniform(rng.standard_normal((n, dim)))


def run_selftest(trials: int = 200, axiom_trials: int = 100, seed: int = 0) -> Dict[str, Any]:
    """Compare the exact solver with permutation enumeration and check the metric axioms."""
    rng = make_rng(seed)
    failures = []
    max_gap = 0.0

    for trial in range(trials):
        n = int(rng.integers(1, 7))
        a, b = _random_cloud(rng, n), _random_cloud(rng, n)
        for p in (1, 2):
            gap = abs(exact_wp(a, b, p)[0] - brute_force_wp(a, b, p))
            max_gap = max(max_gap, gap)
            if gap > 1e-8:
                failures.append(f"oracle trial {trial} (n={n}, p={p}): gap {gap:.3e}")

    for trial in range(axiom_trials):
        n = int(rng.integers(2, 9))
        a, b, c = (_random_cloud(rng, n) for _ in range(3))
        s = float(rng.uniform(-3.0, 3.0))
        w = {p: (exact_wp(a, b, p)[0], exact_wp(b, a, p)[0], exact_wp(a, c, p)[0], exact_wp(b, c, p)[0])
             for p in (1, 2)}
        for p, (ab, ba, ac, bc) in w.items():
            if abs(ab - ba) >= 1e-9:
                failures.append(f"symmetry trial {trial} (p={p})")
            if ac > ab + bc + 1e-7:
                failures.append(f"triangle trial {trial} (p={p})")
            scaled = exact_wp(a.scaled(s), b.scaled(s), p)[0]
            if abs(scaled - abs(s) * ab) > 1e-7:
                failures.append(f"scaling trial {trial} (p={p})")
        if w[1][0] > w[2][0] + 1e-7:
            failures.append(f"W1 <= W2 trial {trial}")

    for line in failures:
        logger.warning("selftest: %s", line)
    return {
        "status": "success" if not failures else "error",
        "oracle_trials": trials,
        "axiom_trials": axiom_trials,
        "max_oracle_gap": max_gap,
        "failures": failures,
        "message": "all checks passed" if not failures else f"{len(failures)} check(s) failed",
    }
