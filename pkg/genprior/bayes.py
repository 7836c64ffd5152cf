"""Gaussian-noise likelihoods, importance-resampled posteriors and stability checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Tuple

import numpy as np
from scipy.special import logsumexp

from . import config
from .errors import DegeneracyError, DomainError, NumericalError
from .measures import PointCloud, make_rng, moment, norms, spawn_seeds, trim_cloud
from .ot import TransportPlan, exact_wp

logger = logging.getLogger(__name__)

__all__ = [
    "ForwardOp",
    "LikelihoodSpec",
    "LinearForward",
    "StabilityReport",
    "WeightedSamples",
    "check_trim_bounds",
    "estimate_cstab",
    "importance_posterior",
    "log_likelihood",
    "normalise_log_weights",
    "resampling_noise_floor",
    "stability_report",
    "systematic_resample",
]

TRIM_MODES = ("prior", "posterior")


class ForwardOp(Protocol):
    input_dim: int
    output_dim: int

    def __call__(self, u: np.ndarray) -> np.ndarray: ...

    def apply(self, points: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class LinearForward:
    """F(u) = A u."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.atleast_2d(np.array(self.matrix, dtype=np.float64))
        if not np.all(np.isfinite(matrix)):
            raise DomainError("Forward matrix must be finite")
        matrix.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def output_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def lipschitz(self) -> float:
        """Spectral norm of the matrix."""
        return float(np.linalg.norm(self.matrix, 2))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(u, dtype=np.float64)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.matrix.T


@dataclass(frozen=True, eq=False)
class LikelihoodSpec:
    """Phi(u; y) = |F(u) - y|^2 / (2 sigma^2)."""

    forward: ForwardOp
    data_y: np.ndarray
    sigma: float

    def __post_init__(self):
        data_y = np.atleast_1d(np.array(self.data_y, dtype=np.float64))
        if not self.sigma > 0 or not math.isfinite(self.sigma):
            raise DomainError(f"Noise level sigma must be positive and finite, got {self.sigma}")
        if data_y.shape != (self.forward.output_dim,):
            raise DomainError(
                f"Data has length {data_y.size}, forward map outputs {self.forward.output_dim} values"
            )
        if not np.all(np.isfinite(data_y)):
            raise DomainError("Data must be finite")
        data_y.flags.writeable = False
        object.__setattr__(self, "data_y", data_y)

    @classmethod
    def benchmark_2d(cls, sigma: float = config.LIKELIHOOD_2D_SIGMA, y=config.LIKELIHOOD_2D_Y) -> "LikelihoodSpec":
        return cls(LinearForward(np.array(config.LIKELIHOOD_2D_F)), np.array(y), sigma)

    @property
    def is_linear(self) -> bool:
        return isinstance(self.forward, LinearForward)

    def with_sigma(self, sigma: float) -> "LikelihoodSpec":
        return LikelihoodSpec(self.forward, self.data_y, sigma)

    def potential(self, u) -> float:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.forward.input_dim,):
            raise DomainError(f"Expected a parameter of length {self.forward.input_dim}, got shape {u.shape}")
        residual = self.forward(u) - self.data_y
        phi = float(residual @ residual) / (2.0 * self.sigma ** 2)
        if not math.isfinite(phi):
            raise NumericalError("Forward map produced a non-finite potential")
        return phi

    def potentials(self, points: np.ndarray) -> np.ndarray:
        """Phi for every row of ``points``."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.forward.input_dim:
            raise DomainError(f"Expected parameters of dimension {self.forward.input_dim}, got shape {points.shape}")
        apply = getattr(self.forward, "apply", None)
        outputs = apply(points) if apply is not None else np.array([self.forward(u) for u in points])
        residual = outputs - self.data_y
        phi = np.sum(residual ** 2, axis=1) / (2.0 * self.sigma ** 2)
        if not np.all(np.isfinite(phi)):
            raise NumericalError("Forward map produced non-finite potentials")
        return phi


def log_likelihood(spec: LikelihoodSpec, u) -> float:
    return -spec.potential(u)


# ----------------------------------------------------------------------------
# Importance resampling
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightedSamples:
    cloud: PointCloud            # prior atoms carrying the normalised posterior weights
    log_weights: np.ndarray      # log-likelihoods before normalisation
    ess_fraction: float


def normalise_log_weights(log_weights: np.ndarray) -> np.ndarray:
    """Self-normalised weights exp(l_i) / sum_j exp(l_j), stable for large |l|."""
    log_weights = np.asarray(log_weights, dtype=np.float64)
    total = logsumexp(log_weights)
    if not np.isfinite(total):
        raise DegeneracyError("Importance weights have no finite normaliser")
    weights = np.exp(log_weights - total)
    return weights / weights.sum()


def systematic_resample(cloud: PointCloud, m_out: int, rng: np.random.Generator) -> PointCloud:
    """m_out equally weighted atoms drawn with a single uniform offset."""
    if m_out < 1:
        raise DomainError(f"Resample size must be at least 1, got {m_out}")
    positions = (np.arange(m_out) + rng.uniform()) / m_out
    cumulative = np.cumsum(cloud.weights)
    idx = np.minimum(np.searchsorted(cumulative, positions, side="right"), cloud.size - 1)
    return PointCloud.uniform(cloud.points[idx])


def importance_posterior(prior: PointCloud, spec: LikelihoodSpec, m_out: int,
                         seed) -> Tuple[WeightedSamples, PointCloud]:
    """Reweight the prior atoms by exp(-Phi) and resample ``m_out`` points."""
    if m_out < 1:
        raise DomainError(f"Resample size must be at least 1, got {m_out}")
    log_lik = -spec.potentials(prior.points)
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior.weights)
    weights = normalise_log_weights(log_prior + log_lik)
    ess_fraction = float(1.0 / (prior.size * np.sum(weights ** 2)))
    weighted = PointCloud(prior.points, weights)
    logger.debug("Importance weights: ess fraction %.4f over %d atoms", ess_fraction, prior.size)
    resampled = systematic_resample(weighted, m_out, make_rng(seed))
    return WeightedSamples(weighted, log_lik, ess_fraction), resampled


def resampling_noise_floor(prior: PointCloud, spec: LikelihoodSpec, m_out: int, seed) -> float:
    """W1 between two independent resamplings of the same posterior."""
    seeds = spawn_seeds(seed, 2)
    _, first = importance_posterior(prior, spec, m_out, seeds[0])
    _, second = importance_posterior(prior, spec, m_out, seeds[1])
    w1, _ = exact_wp(first, second, 1)
    return w1


# ----------------------------------------------------------------------------
# Stability constant
# ----------------------------------------------------------------------------

def _log_mean_exp(cloud: PointCloud, exponent: np.ndarray) -> float:
    with np.errstate(divide="ignore"):
        value = logsumexp(np.log(cloud.weights) + exponent)
    if not np.isfinite(value):
        raise DegeneracyError("exp(-|F(u)|^2 / sigma^2) integrates to zero under the prior")
    return float(value)


def estimate_cstab(prior_true: PointCloud, prior_approx: PointCloud, spec: LikelihoodSpec,
                   plan: Optional[TransportPlan] = None) -> float:
    """Plug-in value of the posterior-to-prior stability constant for a linear forward map.

    Every integral is a weighted sum over the clouds, and the coupling
    integral runs over the optimal W2 plan between the two priors.
    """
    if not spec.is_linear:
        raise DomainError("The stability constant is only estimated for linear forward maps")
    if prior_true.dim != prior_approx.dim:
        raise DomainError(f"Dimension mismatch: {prior_true.dim} vs {prior_approx.dim}")
    if plan is None:
        _, plan = exact_wp(prior_true, prior_approx, 2)
    sigma2 = spec.sigma ** 2
    y_norm = float(np.linalg.norm(spec.data_y))
    lip = spec.forward.lipschitz

    fu = np.linalg.norm(spec.forward.apply(prior_true.points), axis=1)
    fv = np.linalg.norm(spec.forward.apply(prior_approx.points), axis=1)
    log_z_true = _log_mean_exp(prior_true, -fu ** 2 / sigma2)
    log_z_approx = _log_mean_exp(prior_approx, -fv ** 2 / sigma2)
    first_moment = float(np.sum(prior_true.weights * norms(prior_true)))

    rows, cols = np.nonzero(plan.plan)
    mass = plan.plan[rows, cols]
    lip_factor = np.maximum(1.0, lip / (2.0 * sigma2) * (fu[rows] + fv[cols] + 2.0 * y_norm)) ** 2
    size_factor = np.maximum.reduce([
        np.ones_like(mass), norms(prior_true)[rows], norms(prior_approx)[cols]
    ]) ** 2
    coupling = float(np.sum(mass * lip_factor * size_factor))

    log_value = (2.0 * y_norm ** 2 / sigma2 + math.log1p(first_moment)
                 - log_z_true - log_z_approx + 0.5 * math.log(coupling))
    value = math.exp(log_value) if log_value < 700 else math.inf
    if not math.isfinite(value):
        raise NumericalError(f"Stability constant overflows (log value {log_value:.1f})")
    return value


# ----------------------------------------------------------------------------
# Trimming
# ----------------------------------------------------------------------------

def check_trim_bounds(measure: PointCloud, r: float, mode: str) -> Tuple[float, float, bool]:
    """Distance between a cloud and its radius-r trim against the Markov-type bound.

    posterior: W1(nu, nu_r) <= (2 / r) nu(|.|)^2
    prior:     W2(mu, mu_r)^2 <= (4 / r^2) mu(|.|^2)^2
    The inequalities are reported, not assumed; heavy single atoms far out
    can break them.
    """
    if mode not in TRIM_MODES:
        raise DomainError(f"Unknown trim mode '{mode}', expected one of {TRIM_MODES}")
    trimmed = trim_cloud(measure, r)
    if mode == "posterior":
        lhs = 0.0 if trimmed is measure else exact_wp(measure, trimmed, 1)[0]
        rhs = 2.0 / r * moment(measure, 1) ** 2
    else:
        lhs = 0.0 if trimmed is measure else exact_wp(measure, trimmed, 2)[0] ** 2
        rhs = 4.0 / r ** 2 * moment(measure, 2) ** 4
    holds = lhs <= rhs + 1e-7
    if not holds:
        logger.warning("Trim bound violated (%s, r=%.3g): %.4g > %.4g", mode, r, lhs, rhs)
    return float(lhs), float(rhs), bool(holds)


# ----------------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityReport:
    prior_w2: float
    posterior_w1: float
    cstab_estimate: float
    ratio: float
    noise_floor: float
    bound_holds: bool

    def as_row(self) -> dict:
        return {
            "prior_w2": self.prior_w2,
            "posterior_w1": self.posterior_w1,
            "cstab": self.cstab_estimate,
            "ratio": self.ratio,
            "noise_floor": self.noise_floor,
            "bound_holds": self.bound_holds,
        }


def stability_report(prior_true: PointCloud, prior_approx: PointCloud, spec: LikelihoodSpec,
                     m_out: int = config.DEFAULT_POSTERIOR_SIZE, seed=0) -> StabilityReport:
    """Prior W2, posterior W1 and the stability constant for one pair of priors."""
    seeds = spawn_seeds(seed, 3)
    prior_w2, plan = exact_wp(prior_true, prior_approx, 2)
    _, post_true = importance_posterior(prior_true, spec, m_out, seeds[0])
    _, post_approx = importance_posterior(prior_approx, spec, m_out, seeds[1])
    posterior_w1, _ = exact_wp(post_true, post_approx, 1)
    noise_floor = resampling_noise_floor(prior_true, spec, m_out, seeds[2])
    cstab = estimate_cstab(prior_true, prior_approx, spec, plan) if spec.is_linear else math.nan

    ratio = posterior_w1 / prior_w2 if prior_w2 > 0 else math.nan
    bound_holds = bool(posterior_w1 <= cstab * prior_w2 + noise_floor) if spec.is_linear else True
    if not bound_holds:
        logger.warning(
            "Stability bound violated: posterior W1 %.4g > %.4g * %.4g + %.4g",
            posterior_w1, cstab, prior_w2, noise_floor,
        )
    return StabilityReport(float(prior_w2), float(posterior_w1), float(cstab), float(ratio),
                           float(noise_floor), bound_holds)
