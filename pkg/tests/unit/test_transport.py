#!/usr/bin/env python
"""
Unit tests for residual transport maps, their training loop and the map file format.
"""
import math
import os
import sys
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from genprior.errors import ConfigurationError, DomainError, TrainingError
from genprior.measures import PointCloud, sample_benchmark
from genprior.ot import OtConfig, sinkhorn_divergence
from genprior.transport import (
    LinearLift,
    ResidualMapStack,
    TrainConfig,
    check_map_stability,
    forward,
    load_map,
    map_l2_distance,
    pushforward_cloud,
    save_map,
    surrogate_loss_and_grad,
    train,
)

TINY = dict(epochs=5, batch_size=16, learning_rate=0.01, stage_count=1, hidden_widths=(8, 8),
            epsilon_schedule=(1.0, 0.2), eval_size=64)


@pytest.mark.unit
@pytest.mark.transport
class TestResidualMapStack(unittest.TestCase):
    """Test cases for map construction and evaluation."""

    def test_zero_output_stages_are_identity(self):
        stack = ResidualMapStack.initialise(2, 2, 3, (8, 8), seed=0)
        z = np.random.default_rng(0).standard_normal((20, 2))
        np.testing.assert_array_equal(stack.push(z), z)

    def test_affine_map(self):
        stack = ResidualMapStack.affine([[2.0, 0.0], [1.0, 1.0]], [1.0, -1.0])
        np.testing.assert_allclose(forward(stack, [1.0, 2.0]), [3.0, 2.0])

    def test_lift_required_for_dimension_change(self):
        with self.assertRaises(DomainError):
            ResidualMapStack(2, 3)
        stack = ResidualMapStack.initialise(2, 5, 1, (4,), seed=1)
        self.assertEqual(stack.push(np.zeros((7, 2))).shape, (7, 5))

    def test_wrong_latent_shape(self):
        stack = ResidualMapStack.initialise(2, 2, 1, (4,), seed=1)
        with self.assertRaises(DomainError):
            forward(stack, [1.0, 2.0, 3.0])
        with self.assertRaises(DomainError):
            pushforward_cloud(stack, PointCloud.uniform([[1.0]]))

    def test_pushforward_keeps_weights(self):
        stack = ResidualMapStack.affine([[3.0]], [0.0])
        cloud = PointCloud.from_weights([[1.0], [2.0]], [1.0, 3.0])
        pushed = pushforward_cloud(stack, cloud)
        np.testing.assert_allclose(pushed.points.ravel(), [3.0, 6.0])
        np.testing.assert_allclose(pushed.weights, [0.25, 0.75])

    def test_flat_parameters(self):
        stack = ResidualMapStack.initialise(2, 3, 2, (4,), seed=2, zero_output=False)
        values = stack.flat_parameters()
        clone = stack.copy()
        clone.set_flat_parameters(np.zeros_like(values))
        np.testing.assert_array_equal(stack.flat_parameters(), values)
        with self.assertRaises(DomainError):
            clone.set_flat_parameters(np.zeros(values.size + 1))

    def test_pca_lift(self):
        rng = np.random.default_rng(3)
        data = rng.standard_normal((500, 1)) * np.array([[3.0, 0.0]]) + np.array([1.0, 2.0])
        lift = LinearLift.from_pca(data, 1)
        self.assertAlmostEqual(abs(lift.weight[0, 0]), data[:, 0].std(ddof=1), places=9)
        self.assertAlmostEqual(lift.weight[1, 0], 0.0, places=9)
        np.testing.assert_allclose(lift.bias, data.mean(axis=0))


@pytest.mark.unit
@pytest.mark.transport
class TestMapStability(unittest.TestCase):
    """Test cases for the W2 <= L2 map inequality."""

    def test_translation(self):
        reference = sample_benchmark("gaussian", 30, 0)
        shift = ResidualMapStack.affine(np.eye(2), [3.0, 4.0])
        identity = ResidualMapStack.affine(np.eye(2), [0.0, 0.0])
        self.assertAlmostEqual(map_l2_distance(shift, identity, reference), 5.0, places=12)
        w2, l2, holds = check_map_stability(shift, identity, reference)
        self.assertAlmostEqual(w2, 5.0, places=9)
        self.assertTrue(holds)

    def test_random_maps(self):
        reference = sample_benchmark("gaussian", 40, 1)
        for seed in range(5):
            a = ResidualMapStack.initialise(2, 2, 2, (8,), seed=seed, zero_output=False)
            b = ResidualMapStack.initialise(2, 2, 2, (8,), seed=seed + 100, zero_output=False)
            w2, l2, holds = check_map_stability(a, b, reference)
            self.assertTrue(holds)
            self.assertLessEqual(w2, l2 + 1e-7)

    def test_incompatible_maps(self):
        reference = sample_benchmark("gaussian", 10, 2)
        with self.assertRaises(DomainError):
            map_l2_distance(ResidualMapStack.affine(np.eye(2), [0, 0]),
                            ResidualMapStack.affine(np.ones((3, 2)), [0, 0, 0]), reference)


@pytest.mark.unit
@pytest.mark.transport
class TestTrainConfig(unittest.TestCase):
    """Test cases for training configuration."""

    def test_validation(self):
        for bad in (dict(epochs=0), dict(batch_size=1), dict(learning_rate=0.0), dict(stage_count=-1),
                    dict(epsilon_schedule=()), dict(epsilon_schedule=(1.0, -0.1)), dict(optimizer="lbfgs"),
                    dict(generator_update_period=0)):
            with self.assertRaises(ConfigurationError):
                TrainConfig(**bad)

    def test_epsilon_schedule(self):
        cfg = TrainConfig(epochs=11, epsilon_schedule=(1.0, 0.01))
        self.assertAlmostEqual(cfg.epsilon_at(0), 1.0)
        self.assertAlmostEqual(cfg.epsilon_at(10), 0.01)
        self.assertAlmostEqual(cfg.epsilon_at(5), 0.1)
        values = [cfg.epsilon_at(e) for e in range(11)]
        self.assertTrue(all(x > y for x, y in zip(values, values[1:])))
        self.assertAlmostEqual(TrainConfig(epsilon_schedule=(0.3,)).epsilon_at(7), 0.3)


@pytest.mark.unit
@pytest.mark.transport
class TestTraining(unittest.TestCase):
    """Test cases for gradients and greedy stage training."""

    def test_surrogate_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        stack = ResidualMapStack.initialise(2, 2, 1, (4,), seed=5, zero_output=False)
        x = rng.standard_normal((8, 2))
        y = rng.standard_normal((8, 2)) + 1.0
        cfg = OtConfig.sinkhorn(0.5, tolerance=1e-10)
        _, grads = surrogate_loss_and_grad(stack.modules(), x, y, cfg)
        analytic = np.concatenate([g.ravel() for g in grads])

        theta = stack.flat_parameters()
        h = 1e-4
        numeric = np.zeros_like(theta)
        for i in range(theta.size):
            values = []
            for sign in (1.0, -1.0):
                shifted = theta.copy()
                shifted[i] += sign * h
                stack.set_flat_parameters(shifted)
                values.append(sinkhorn_divergence(PointCloud.uniform(stack.push(x)),
                                                  PointCloud.uniform(y), cfg)[0])
            numeric[i] = (values[0] - values[1]) / (2 * h)
        stack.set_flat_parameters(theta)
        np.testing.assert_allclose(analytic, numeric, atol=1e-4, rtol=1e-3)

    def test_training_does_not_increase_divergence(self):
        target = PointCloud.uniform(sample_benchmark("gaussian", 48, 6).points + np.array([2.0, 0.0]))
        reference = sample_benchmark("gaussian", 48, 7)
        cfg = TrainConfig(**TINY)
        stack, history = train(target, reference, cfg)
        self.assertEqual(len(history), cfg.epochs * cfg.stage_count)
        self.assertTrue(all(math.isfinite(v) for v in history))

        eval_cfg = cfg.ot_config(cfg.epsilon_schedule[-1])
        before, _ = sinkhorn_divergence(reference, target, eval_cfg)
        after, _ = sinkhorn_divergence(pushforward_cloud(stack, reference), target, eval_cfg)
        self.assertLessEqual(after, before + 1e-9)

    def test_training_is_deterministic(self):
        target = sample_benchmark("two-moons", 40, 8)
        reference = sample_benchmark("gaussian", 40, 9)
        first, _ = train(target, reference, TrainConfig(**TINY, seed=11))
        second, _ = train(target, reference, TrainConfig(**TINY, seed=11))
        np.testing.assert_array_equal(first.flat_parameters(), second.flat_parameters())

    def test_latent_lift(self):
        target = sample_benchmark("gaussian", 40, 10)
        reference = PointCloud.uniform(np.random.default_rng(11).standard_normal((40, 1)))
        stack, _ = train(target, reference, TrainConfig(**{**TINY, "stage_count": 0}))
        self.assertEqual((stack.latent_dim, stack.output_dim), (1, 2))
        self.assertIsNotNone(stack.lift)
        self.assertEqual(stack.push(reference.points).shape, (40, 2))

    def test_no_stages_keeps_identity(self):
        target = sample_benchmark("gaussian", 20, 12)
        stack, history = train(target, sample_benchmark("gaussian", 20, 13), TrainConfig(**{**TINY, "stage_count": 0}))
        self.assertEqual(stack.stages, [])
        self.assertEqual(len(history), 1)

    def test_non_finite_loss(self):
        target = sample_benchmark("gaussian", 20, 14)
        reference = sample_benchmark("gaussian", 20, 15)
        with patch("genprior.transport.sinkhorn_divergence", return_value=(float("nan"), np.zeros((16, 2)))):
            with self.assertRaises(TrainingError) as ctx:
                train(target, reference, TrainConfig(**TINY))
        self.assertEqual(ctx.exception.epoch, 0)
        self.assertEqual(ctx.exception.stage, 1)


@pytest.mark.unit
@pytest.mark.transport
class TestMapFile(unittest.TestCase):
    """Test cases for saving and loading maps."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_round_trip(self):
        stack = ResidualMapStack.initialise(3, 5, 2, (6, 4), seed=16, zero_output=False)
        path = save_map(stack, os.path.join(self.tmp.name, "nested", "map.gprm"))
        loaded = load_map(path)
        self.assertEqual((loaded.latent_dim, loaded.output_dim), (3, 5))
        self.assertEqual([s.widths for s in loaded.stages], [[5, 6, 4, 5], [5, 6, 4, 5]])
        z = np.random.default_rng(0).standard_normal((10, 3))
        np.testing.assert_array_equal(loaded.push(z), stack.push(z))

    def test_rejects_foreign_files(self):
        path = os.path.join(self.tmp.name, "bad.gprm")
        with open(path, "wb") as fh:
            fh.write(b"NOPE" + bytes(40))
        with self.assertRaises(ConfigurationError):
            load_map(path)
        with open(path, "wb") as fh:
            fh.write(b"GPRM")
        with self.assertRaises(ConfigurationError):
            load_map(path)


if __name__ == '__main__':
    unittest.main()
