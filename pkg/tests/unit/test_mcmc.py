#!/usr/bin/env python
"""
Unit tests for latent pCN sampling and the chain diagnostics.
"""
import math
import os
import sys
import unittest

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from genprior.bayes import LikelihoodSpec, LinearForward
from genprior.errors import AdaptationError, ChainError, ConfigurationError, DegeneracyError, DomainError, NumericalError
from genprior.mcmc import PcnConfig, _adapt, acf, ess, pcn_acceptance_probability, pcn_run
from genprior.transport import ResidualMapStack


def _identity_generator(dim=2):
    return ResidualMapStack.initialise(dim, dim, 0, (), seed=0)


def _flat_likelihood(dim=2):
    """Phi identically zero: the chain samples the reference Gaussian."""
    return LikelihoodSpec(LinearForward(np.zeros((dim, dim))), np.zeros(dim), 1.0)


class _FailingForward:
    input_dim = 2
    output_dim = 1

    def __call__(self, u):
        raise NumericalError("solver blew up")


def _ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = rng.standard_normal()
    noise = rng.standard_normal(n) * math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + noise[t]
    return x


@pytest.mark.unit
@pytest.mark.mcmc
class TestPcnConfig(unittest.TestCase):
    """Test cases for sampler configuration."""

    def test_counts(self):
        cfg = PcnConfig(n_samples=100, burn_fraction=0.2, thin=3)
        self.assertEqual(cfg.burn_in, 20)
        self.assertEqual(cfg.retained_count, 27)

    def test_validation(self):
        for bad in (dict(beta0=0.0), dict(beta0=1.0), dict(n_samples=0), dict(burn_fraction=0.6),
                    dict(thin=0), dict(adapt_window=0), dict(target_band=(0.4, 0.2))):
            with self.assertRaises(ConfigurationError):
                PcnConfig(**bad)

    def test_acceptance_probability(self):
        self.assertEqual(pcn_acceptance_probability(1.0, 0.0), 1.0)
        self.assertEqual(pcn_acceptance_probability(2.0, 2.0), 1.0)
        self.assertAlmostEqual(pcn_acceptance_probability(0.0, 1.0), math.exp(-1.0))

    def test_adaptation_rule(self):
        self.assertEqual(_adapt(0.5, 0.9, (0.2, 0.4)), 0.25)
        self.assertEqual(_adapt(0.5, 0.1, (0.2, 0.4)), 0.75)
        self.assertEqual(_adapt(0.5, 0.3, (0.2, 0.4)), 0.5)


@pytest.mark.unit
@pytest.mark.mcmc
class TestPcnRun(unittest.TestCase):
    """Test cases for the pCN chain."""

    def test_flat_potential_samples_reference(self):
        cfg = PcnConfig(n_samples=20000, burn_fraction=0.0, beta0=0.5, seed=1)
        chain = pcn_run(_identity_generator(), _flat_likelihood(), cfg)
        self.assertEqual(chain.acceptance_rate, 1.0)
        self.assertEqual(chain.adaptations, [])
        self.assertEqual(chain.latent_samples.shape, (20000, 2))
        np.testing.assert_array_equal(chain.pushed_samples, chain.latent_samples)
        self.assertLess(np.abs(chain.latent_samples.mean(axis=0)).max(), 0.05)
        self.assertLess(np.abs(chain.latent_samples.var(axis=0) - 1.0).max(), 0.06)

    def test_thinning(self):
        cfg = PcnConfig(n_samples=100, burn_fraction=0.2, thin=3, adapt_window=10, seed=2)
        chain = pcn_run(_identity_generator(), _flat_likelihood(), cfg)
        self.assertEqual(chain.latent_samples.shape[0], cfg.retained_count)
        self.assertEqual(chain.potentials.shape, (cfg.retained_count,))

    def test_adaptation_shrinks_beta_when_accepting_everything(self):
        cfg = PcnConfig(n_samples=1000, burn_fraction=0.2, adapt_window=100, seed=3)
        chain = pcn_run(_identity_generator(), _flat_likelihood(), cfg)
        self.assertEqual([a.step for a in chain.adaptations], [100, 200])
        self.assertEqual([a.beta_after for a in chain.adaptations], [0.25, 0.125])
        self.assertEqual(chain.beta_final, 0.125)
        self.assertEqual(chain.adaptations[0].window_acceptance, 1.0)

    def test_adaptation_grows_beta_when_rejecting(self):
        spec = LikelihoodSpec(LinearForward(np.eye(2)), np.zeros(2), 0.001)
        cfg = PcnConfig(n_samples=500, burn_fraction=0.2, adapt_window=100, seed=4)
        chain = pcn_run(_identity_generator(), spec, cfg)
        first = chain.adaptations[0]
        self.assertLess(first.window_acceptance, 0.2)
        self.assertEqual(first.beta_after, 0.75)

    def test_adaptation_leaving_limits(self):
        cfg = PcnConfig(n_samples=1000, burn_fraction=0.2, adapt_window=100, beta_limits=(0.45, 0.55), seed=5)
        with self.assertRaises(AdaptationError) as ctx:
            pcn_run(_identity_generator(), _flat_likelihood(), cfg)
        self.assertEqual(ctx.exception.step, 99)

    def test_forward_failure(self):
        spec = LikelihoodSpec(_FailingForward(), [0.0], 1.0)
        with self.assertRaises(ChainError) as ctx:
            pcn_run(_identity_generator(), spec, PcnConfig(n_samples=10))
        self.assertEqual(ctx.exception.step, 0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DomainError):
            pcn_run(_identity_generator(3), _flat_likelihood(2), PcnConfig(n_samples=10))

    def test_seeded(self):
        spec = LikelihoodSpec.benchmark_2d()
        cfg = PcnConfig(n_samples=300, seed=6)
        first = pcn_run(_identity_generator(), spec, cfg)
        second = pcn_run(_identity_generator(), spec, cfg)
        np.testing.assert_array_equal(first.latent_samples, second.latent_samples)
        self.assertEqual(first.beta_final, second.beta_final)


@pytest.mark.unit
@pytest.mark.mcmc
class TestDiagnostics(unittest.TestCase):
    """Test cases for autocorrelation and effective sample size."""

    def test_acf_of_ar1(self):
        rho = acf(_ar1(0.9, 100_000, 7), 5)
        self.assertEqual(rho[0], 1.0)
        self.assertAlmostEqual(rho[1], 0.9, delta=0.02)
        self.assertAlmostEqual(rho[2], 0.81, delta=0.03)

    def test_acf_errors(self):
        with self.assertRaises(DegeneracyError):
            acf(np.ones(50), 5)
        with self.assertRaises(DomainError):
            acf(np.arange(5.0), 5)
        with self.assertRaises(DomainError):
            acf(np.arange(5.0), 0)

    def test_ess_of_independent_draws(self):
        n = 10_000
        value = ess(np.random.default_rng(8).standard_normal(n))
        self.assertGreaterEqual(value, 0.8 * n)
        self.assertLessEqual(value, n)

    def test_ess_of_ar1(self):
        phi, n = 0.9, 100_000
        expected = n * (1.0 - phi) / (1.0 + phi)
        value = ess(_ar1(phi, n, 9))
        self.assertGreaterEqual(value, 0.75 * expected)
        self.assertLessEqual(value, 1.25 * expected)

    def test_ess_of_doubled_draws(self):
        """Each draw repeated twice carries half the information."""
        series = np.repeat(np.random.default_rng(10).standard_normal(10_000), 2)
        value = ess(series)
        self.assertAlmostEqual(value / (series.size / 2), 1.0, delta=0.2)


if __name__ == '__main__':
    unittest.main()
