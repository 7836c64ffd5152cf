"""Exact and entropic optimal transport between point clouds.

Exact W_p uses the network simplex from POT for general weights and a
rectangular assignment solve for uniform clouds of equal size. The entropic
solver works in the log domain with an epsilon-scaling warm start and
provides the debiased Sinkhorn divergence together with its gradient with
respect to the support points of the first cloud.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import ot as pot
import psutil
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from . import config
from .errors import ConfigurationError, DomainError, NumericalError
from .measures import PointCloud

logger = logging.getLogger(__name__)

__all__ = [
    "EntropicResult",
    "OtConfig",
    "TransportPlan",
    "brute_force_wp",
    "entropic_ot",
    "exact_wp",
    "ground_cost",
    "memory_budget_bytes",
    "sinkhorn_divergence",
    "w1_le_w2_check",
]

SOLVERS = ("exact", "sinkhorn")


@dataclass(frozen=True)
class OtConfig:
    ground_power: int = 2
    solver: str = "exact"
    epsilon: Optional[float] = None
    max_iters: int = config.SINKHORN_MAX_ITERS
    tolerance: float = config.SINKHORN_TOLERANCE
    scaling_steps: int = config.SINKHORN_SCALING_STEPS

    def __post_init__(self):
        if self.ground_power not in (1, 2):
            raise ConfigurationError(f"ground_power must be 1 or 2, got {self.ground_power}")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"Unknown OT solver '{self.solver}'")
        if self.solver == "sinkhorn":
            if self.epsilon is None or not self.epsilon > 0:
                raise ConfigurationError("Sinkhorn solver requires epsilon > 0")
        elif self.epsilon is not None:
            raise ConfigurationError("epsilon is only meaningful for the sinkhorn solver")
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.max_iters < 1 or self.scaling_steps < 1:
            raise ConfigurationError("max_iters and scaling_steps must be at least 1")

    @classmethod
    def sinkhorn(cls, epsilon: float, **kwargs) -> "OtConfig":
        return cls(solver="sinkhorn", epsilon=epsilon, **kwargs)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling matrix between two clouds and its transport cost."""

    plan: np.ndarray
    source_marginal: np.ndarray
    target_marginal: np.ndarray
    cost: float
    ground_power: int

    @property
    def marginal_violation(self) -> float:
        rows = np.abs(self.plan.sum(axis=1) - self.source_marginal).max()
        cols = np.abs(self.plan.sum(axis=0) - self.target_marginal).max()
        return float(max(rows, cols))


def memory_budget_bytes() -> int:
    """Dense-matrix budget: the configured cap, clamped to half the installed memory.

    The result does not depend on current machine load.
    """
    installed = psutil.virtual_memory().total // 2
    return int(min(config.OT_BUDGET_MB * 2 ** 20, installed))


def _check_inputs(a: PointCloud, b: PointCloud) -> None:
    if a.dim != b.dim:
        raise DomainError(f"Dimension mismatch: {a.dim} vs {b.dim}")
    needed = a.size * b.size * 8
    if needed > memory_budget_bytes():
        raise DomainError(
            f"Cost matrix {a.size}x{b.size} ({needed / 2 ** 20:.0f} MB) exceeds the OT memory budget"
        )


def ground_cost(x: np.ndarray, y: np.ndarray, p: int) -> np.ndarray:
    """Squared Euclidean cost for p = 2, Euclidean for p = 1."""
    if p == 2:
        return cdist(x, y, metric="sqeuclidean")
    if p == 1:
        return cdist(x, y, metric="euclidean")
    raise ConfigurationError(f"ground power must be 1 or 2, got {p}")


def exact_wp(a: PointCloud, b: PointCloud, p: int = 2) -> Tuple[float, TransportPlan]:
    """W_p(a, b) and an optimal plan."""
    _check_inputs(a, b)
    cost_matrix = ground_cost(a.points, b.points, p)

    if a.size == b.size and a.is_uniform and b.is_uniform:
        rows, cols = linear_sum_assignment(cost_matrix)
        plan = np.zeros_like(cost_matrix)
        plan[rows, cols] = 1.0 / a.size
        cost = float(cost_matrix[rows, cols].mean())
    else:
        plan, log = pot.emd(
            a.weights, b.weights, cost_matrix, numItermax=config.OT_EMD_MAX_ITERS, log=True
        )
        if log.get("warning") is not None or log.get("result_code", 1) != 1:
            raise NumericalError(
                f"Network simplex did not reach optimality: {log.get('warning')}",
                iterations=config.OT_EMD_MAX_ITERS,
            )
        cost = float(np.sum(plan * cost_matrix))

    cost = max(cost, 0.0)
    transport = TransportPlan(plan, a.weights, b.weights, cost, p)
    return cost ** (1.0 / p), transport


def brute_force_wp(a: PointCloud, b: PointCloud, p: int = 2) -> float:
    """Exact W_p by enumerating all n! assignments (test oracle)."""
    if a.dim != b.dim:
        raise DomainError(f"Dimension mismatch: {a.dim} vs {b.dim}")
    if a.size != b.size or not (a.is_uniform and b.is_uniform):
        raise DomainError("Brute force needs uniform clouds of equal size")
    n = a.size
    if n > config.BRUTE_FORCE_MAX_POINTS:
        raise DomainError(f"Brute force refused for n = {n} > {config.BRUTE_FORCE_MAX_POINTS}")
    cost_matrix = ground_cost(a.points, b.points, p)
    perms = np.array(list(itertools.permutations(range(n))))
    costs = cost_matrix[np.arange(n), perms].mean(axis=1)
    return float(max(costs.min(), 0.0) ** (1.0 / p))


def w1_le_w2_check(a: PointCloud, b: PointCloud) -> bool:
    w1, _ = exact_wp(a, b, 1)
    w2, _ = exact_wp(a, b, 2)
    return w1 <= w2 + 1e-7


# ----------------------------------------------------------------------------
# Entropic transport
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EntropicResult:
    value: float
    plan: np.ndarray
    f: np.ndarray
    g: np.ndarray
    iterations: int
    violation: float


def _log_weights(w: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(w)


def entropic_ot(a: PointCloud, b: PointCloud, cfg: OtConfig) -> EntropicResult:
    """OT_eps(a, b) = <P, C> + eps KL(P | a x b) by log-domain Sinkhorn."""
    if cfg.solver != "sinkhorn":
        raise ConfigurationError("entropic_ot needs a sinkhorn OtConfig")
    _check_inputs(a, b)
    cost = ground_cost(a.points, b.points, cfg.ground_power)
    loga, logb = _log_weights(a.weights), _log_weights(b.weights)
    f = np.zeros(a.size)
    g = np.zeros(b.size)

    def sweep(eps):
        f_new = -eps * logsumexp((g[None, :] - cost) / eps + logb[None, :], axis=1)
        g_new = -eps * logsumexp((f_new[:, None] - cost) / eps + loga[:, None], axis=0)
        return f_new, g_new

    eps = cfg.epsilon
    diameter = float(cost.max())
    if diameter > eps and cfg.scaling_steps > 1:
        for level in np.geomspace(diameter, eps, cfg.scaling_steps)[:-1]:
            for _ in range(10):
                f, g = sweep(level)

    violation = np.inf
    iterations = 0
    while iterations < cfg.max_iters:
        f, g = sweep(eps)
        iterations += 1
        if iterations % 5 == 0 or iterations == cfg.max_iters:
            log_plan = (f[:, None] + g[None, :] - cost) / eps + loga[:, None] + logb[None, :]
            violation = float(np.abs(np.exp(logsumexp(log_plan, axis=1)) - a.weights).sum())
            if violation <= cfg.tolerance:
                break
    if not violation <= cfg.tolerance:
        raise NumericalError(
            f"Sinkhorn did not converge in {iterations} iterations (marginal violation {violation:.3e})",
            iterations=iterations,
            violation=violation,
        )

    plan = np.exp((f[:, None] + g[None, :] - cost) / eps + loga[:, None] + logb[None, :])
    value = float(np.dot(a.weights, f) + np.dot(b.weights, g))
    logger.debug("Sinkhorn eps=%.3g converged in %d iterations (violation %.2e)", eps, iterations, violation)
    return EntropicResult(value, plan, f, g, iterations, violation)


def _cost_gradient(x: np.ndarray, y: np.ndarray, plan: np.ndarray, p: int) -> np.ndarray:
    """d/dx_i of sum_ij plan_ij c(x_i, y_j)."""
    if p == 2:
        return 2.0 * (plan.sum(axis=1)[:, None] * x - plan @ y)
    diff = x[:, None, :] - y[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    unit = np.divide(diff, dist[:, :, None], out=np.zeros_like(diff), where=dist[:, :, None] > 0)
    return np.einsum("ij,ijk->ik", plan, unit)


def sinkhorn_divergence(a: PointCloud, b: PointCloud, cfg: OtConfig) -> Tuple[float, np.ndarray]:
    """Debiased S_eps(a, b) and its gradient with respect to the points of ``a``."""
    if cfg.solver != "sinkhorn":
        raise ConfigurationError("sinkhorn_divergence needs solver='sinkhorn'")
    ab = entropic_ot(a, b, cfg)
    aa = entropic_ot(a, a, cfg)
    bb = entropic_ot(b, b, cfg)
    value = ab.value - 0.5 * aa.value - 0.5 * bb.value

    x, p = a.points, cfg.ground_power
    grad = _cost_gradient(x, b.points, ab.plan, p)
    # a appears in both arguments of OT_eps(a, a)
    grad -= 0.5 * (_cost_gradient(x, x, aa.plan, p) + _cost_gradient(x, x, aa.plan.T, p))
    return float(value), grad
