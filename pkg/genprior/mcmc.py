"""Latent-space preconditioned Crank-Nicolson sampling and chain diagnostics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import fft
from tqdm import tqdm

from . import config
from .bayes import LikelihoodSpec
from .errors import AdaptationError, ChainError, ConfigurationError, DegeneracyError, DomainError, LabError
from .measures import make_rng
from .transport import ResidualMapStack

logger = logging.getLogger(__name__)

__all__ = [
    "AdaptationStep",
    "ChainResult",
    "PcnConfig",
    "acf",
    "ess",
    "pcn_acceptance_probability",
    "pcn_run",
]


@dataclass(frozen=True)
class PcnConfig:
    beta0: float = config.PCN_BETA0
    n_samples: int = 10_000
    burn_fraction: float = config.PCN_BURN_FRACTION
    adapt_window: int = config.PCN_ADAPT_WINDOW
    target_band: Tuple[float, float] = config.PCN_TARGET_BAND
    seed: int = 0
    thin: int = 1
    beta_limits: Tuple[float, float] = config.PCN_BETA_LIMITS
    show_progress: bool = False

    def __post_init__(self):
        if not 0.0 < self.beta0 < 1.0:
            raise ConfigurationError(f"beta0 must lie in (0, 1), got {self.beta0}")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be at least 1")
        if not 0.0 <= self.burn_fraction <= 0.5:
            raise ConfigurationError("burn_fraction must lie in [0, 0.5]")
        if self.adapt_window < 1 or self.thin < 1:
            raise ConfigurationError("adapt_window and thin must be at least 1")
        lo, hi = self.target_band
        if not 0.0 <= lo < hi <= 1.0:
            raise ConfigurationError(f"Invalid acceptance band {self.target_band}")

    @property
    def burn_in(self) -> int:
        return int(math.floor(self.burn_fraction * self.n_samples))

    @property
    def retained_count(self) -> int:
        return -(-(self.n_samples - self.burn_in) // self.thin)


@dataclass(frozen=True)
class AdaptationStep:
    step: int
    window_acceptance: float
    beta_before: float
    beta_after: float


@dataclass(eq=False)
class ChainResult:
    latent_samples: np.ndarray
    pushed_samples: np.ndarray
    acceptance_rate: float
    beta_final: float
    adaptations: List[AdaptationStep] = field(default_factory=list)
    potentials: Optional[np.ndarray] = None


def pcn_acceptance_probability(phi_current: float, phi_proposed: float) -> float:
    """min(1, exp(Phi(current) - Phi(proposed)))."""
    delta = phi_current - phi_proposed
    if delta >= 0:
        return 1.0
    return math.exp(delta)


def _adapt(beta: float, rate: float, band: Tuple[float, float]) -> float:
    lo, hi = band
    if rate > hi:
        return beta / 2.0
    if rate < lo:
        return beta + (1.0 - beta) / 2.0
    return beta


def pcn_run(generator: ResidualMapStack, spec: LikelihoodSpec, cfg: PcnConfig) -> ChainResult:
    """Sample the latent posterior with z' = beta z + sqrt(1 - beta^2) xi.

    The chain runs ``cfg.n_samples`` steps. During the first ``cfg.burn_in``
    steps beta is adapted every ``adapt_window`` steps; afterwards it is
    frozen and every ``thin``-th state is kept.
    """
    if spec.forward.input_dim != generator.output_dim:
        raise DomainError(
            f"Likelihood expects parameters of dimension {spec.forward.input_dim}, "
            f"generator outputs {generator.output_dim}"
        )
    rng = make_rng(cfg.seed)
    dim = generator.latent_dim
    n_burn = cfg.burn_in

    def potential(z: np.ndarray, step: int) -> float:
        try:
            return spec.potential(generator.push(z[None, :])[0])
        except LabError as exc:
            raise ChainError(f"Forward evaluation failed at step {step}: {exc}", step) from exc

    z = rng.standard_normal(dim)
    phi = potential(z, 0)
    beta = cfg.beta0
    adaptations: List[AdaptationStep] = []
    kept_latent, kept_phi = [], []
    window_accepts = 0
    post_accepts = 0

    steps = range(cfg.n_samples)
    if cfg.show_progress:
        steps = tqdm(steps, desc="pCN", leave=False)
    for step in steps:
        proposal = beta * z + math.sqrt(1.0 - beta * beta) * rng.standard_normal(dim)
        phi_prop = potential(proposal, step)
        accepted = rng.uniform() < pcn_acceptance_probability(phi, phi_prop)
        if accepted:
            z, phi = proposal, phi_prop

        if step < n_burn:
            window_accepts += accepted
            if (step + 1) % cfg.adapt_window == 0:
                rate = window_accepts / cfg.adapt_window
                new_beta = _adapt(beta, rate, cfg.target_band)
                lo, hi = cfg.beta_limits
                if not lo < new_beta < hi:
                    raise AdaptationError(
                        f"Adaptation moved beta to {new_beta:.3g}, outside ({lo}, {hi})", step
                    )
                adaptations.append(AdaptationStep(step + 1, rate, beta, new_beta))
                logger.debug("step %d: window acceptance %.3f, beta %.4g -> %.4g", step + 1, rate, beta, new_beta)
                beta = new_beta
                window_accepts = 0
        else:
            post_accepts += accepted
            if (step - n_burn) % cfg.thin == 0:
                kept_latent.append(z.copy())
                kept_phi.append(phi)

    latent = np.array(kept_latent)
    acceptance = post_accepts / (cfg.n_samples - n_burn)
    logger.info("pCN finished: %d steps, acceptance %.3f, beta %.4g", cfg.n_samples, acceptance, beta)
    return ChainResult(
        latent_samples=latent,
        pushed_samples=generator.push(latent),
        acceptance_rate=float(acceptance),
        beta_final=float(beta),
        adaptations=adaptations,
        potentials=np.array(kept_phi),
    )


# ----------------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------------

def acf(series, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimate for lags 0..max_lag (FFT based)."""
    x = np.asarray(series, dtype=np.float64).ravel()
    n = x.size
    if not 1 <= max_lag < n:
        raise DomainError(f"Need series length > max_lag >= 1, got n={n}, max_lag={max_lag}")
    if np.ptp(x) == 0:
        raise DegeneracyError("Series is constant; autocorrelation is undefined")
    x = x - x.mean()
    size = fft.next_fast_len(2 * n)
    spectrum = fft.rfft(x, size)
    acov = fft.irfft(spectrum * np.conj(spectrum), size)[:max_lag + 1] / n
    if not acov[0] > 1e-300:
        raise DegeneracyError("Series has zero variance; autocorrelation is undefined")
    return acov / acov[0]


def ess(series, max_lag: Optional[int] = None) -> float:
    """Effective sample size with Geyer's initial positive sequence truncation."""
    x = np.asarray(series, dtype=np.float64).ravel()
    n = x.size
    lag = n - 1 if max_lag is None else max_lag
    rho = acf(x, lag)
    tau = -1.0
    for k in range(0, (lag + 1) // 2):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    if tau <= 0:
        return float(n)
    return float(min(n, n / tau))
