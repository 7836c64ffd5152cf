#!/usr/bin/env python
"""
Unit tests for sweep bookkeeping, slope fits, plots, manifests and the OT selftest.
"""
import json
import math
import os
import sys
import tempfile
import unittest
import xml.etree.ElementTree as ET
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from genprior import config
from genprior.errors import ConfigurationError, DomainError, TrainingError
from genprior.experiments import (
    CLOUD_FILES,
    CSV_COLUMNS,
    SweepSpec,
    emit_plot,
    emit_scatter,
    fit_slope,
    run_empirical_rate,
    run_prior_clouds,
    run_selftest,
    run_sweep,
    summarise_sweep,
    sweep_slopes,
    two_sample_noise_floor,
    write_manifest,
)
from genprior.experiments.sweeps import fit_to_budget, oracle_target, sweep_cells
from genprior.measures import BenchmarkDist, PointCloud, sample_benchmark
from genprior.transport import TrainConfig

TINY_TRAIN = TrainConfig(epochs=5, batch_size=16, learning_rate=0.01, stage_count=1, hidden_widths=(8, 8),
                         epsilon_schedule=(1.0, 0.2), eval_size=64)


def _tiny_spec(**overrides):
    settings = dict(variable="sample_size", grid=(16, 32, 64), dist=BenchmarkDist("gaussian"), repeats=1,
                    train=TINY_TRAIN, n_ref=256, seed0=5, sample_size=32, train_reference_size=64,
                    prior_eval_size=64, posterior_size=64)
    settings.update(overrides)
    return SweepSpec(**settings)


def _rows(values, prior, posterior, errors=None):
    n = len(values)
    return pd.DataFrame({
        "dist": ["gaussian"] * n, "sweep_var": ["sample_size"] * n, "sweep_value": values,
        "seed": list(range(n)), "prior_w2": prior, "posterior_w1": posterior,
        "cstab": [10.0] * n, "ratio": [p / q for p, q in zip(posterior, prior)], "noise_floor": [0.01] * n,
        "bound_holds": [True] * n, "error": errors or [""] * n,
    }, columns=CSV_COLUMNS)


@pytest.mark.unit
@pytest.mark.experiments
class TestSlopes(unittest.TestCase):
    """Test cases for log-log fits and sweep summaries."""

    def test_fit_slope(self):
        fit = fit_slope(np.exp([0.0, 1.0, 2.0]), np.exp([1.0, 2.0, 4.0]))
        self.assertAlmostEqual(fit.slope, 1.5)
        self.assertAlmostEqual(fit.intercept, 5.0 / 6.0)
        self.assertAlmostEqual(fit.r_squared, 81.0 / 84.0)

    def test_fit_slope_rejects_bad_input(self):
        with self.assertRaises(DomainError):
            fit_slope([1.0, 2.0], [1.0, 2.0])
        with self.assertRaises(DomainError):
            fit_slope([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])
        with self.assertRaises(DomainError):
            fit_slope([1.0, 2.0, 3.0], [1.0, np.nan, 2.0])

    def test_summary_excludes_errored_rows(self):
        rows = _rows([16, 16, 32, 32], [0.4, 0.6, 0.3, 0.1], [0.2, 0.2, 0.1, 0.1],
                     errors=["", "", "", "TrainingError: boom"])
        summary = summarise_sweep(rows).set_index("sweep_value")
        self.assertEqual(summary.loc[16, "n"], 2)
        self.assertEqual(summary.loc[32, "n"], 1)
        self.assertAlmostEqual(summary.loc[16, "prior_w2_mean"], 0.5)
        self.assertAlmostEqual(summary.loc[16, "prior_w2_se"], 0.1)
        self.assertAlmostEqual(summary.loc[32, "prior_w2_mean"], 0.3)

    def test_sweep_slopes(self):
        values = [16, 64, 256]
        rows = _rows(values, [v ** -0.5 for v in values], [2.0 * v ** -0.25 for v in values])
        slopes = sweep_slopes(summarise_sweep(rows), "swissroll", "sample_size").set_index("metric")
        self.assertAlmostEqual(slopes.loc["prior_w2", "slope"], -0.5)
        self.assertAlmostEqual(slopes.loc["posterior_w1", "slope"], -0.25)
        self.assertAlmostEqual(slopes.loc["posterior_w1", "intercept"], math.log(2.0))
        self.assertEqual(slopes.loc["prior_w2", "reference_slope"], -0.307)

    def test_sweep_slopes_with_too_few_points(self):
        slopes = sweep_slopes(summarise_sweep(_rows([16, 32], [0.5, 0.4], [0.3, 0.2])), "gaussian", "width")
        self.assertTrue(slopes["slope"].isna().all())
        self.assertTrue(slopes["reference_slope"].isna().all())


@pytest.mark.unit
@pytest.mark.experiments
class TestSweepSpec(unittest.TestCase):
    """Test cases for sweep configuration and cell seeding."""

    def test_validation(self):
        with self.assertRaises(ConfigurationError):
            _tiny_spec(variable="depth")
        with self.assertRaises(ConfigurationError):
            _tiny_spec(grid=(32, 16))
        with self.assertRaises(ConfigurationError):
            _tiny_spec(grid=())
        with self.assertRaises(ConfigurationError):
            _tiny_spec(repeats=0)
        with self.assertRaises(ConfigurationError):
            _tiny_spec(workers=0)

    def test_cell_setup(self):
        self.assertEqual(_tiny_spec().cell_setup(16), (16, TINY_TRAIN))
        n, cfg = _tiny_spec(variable="width", grid=(4, 8, 16)).cell_setup(8)
        self.assertEqual((n, cfg.hidden_widths), (32, (8, 8)))
        n, cfg = _tiny_spec(variable="epochs", grid=(2, 4, 8)).cell_setup(4)
        self.assertEqual((n, cfg.epochs), (32, 4))

    def test_cells_are_seeded(self):
        spec = _tiny_spec(repeats=2)
        cells = sweep_cells(spec)
        self.assertEqual(len(cells), 6)
        self.assertEqual([c.index for c in cells], list(range(6)))
        self.assertEqual([c.value for c in cells], [16, 16, 32, 32, 64, 64])
        self.assertEqual(cells, sweep_cells(_tiny_spec(repeats=2)))
        self.assertEqual(len({c.seed for c in cells}), 6)

    def test_fit_to_budget(self):
        cloud = sample_benchmark("gaussian", 100, 0)
        self.assertIs(fit_to_budget(cloud, 1000, 0), cloud)
        with patch.object(config, "OT_BUDGET_MB", 1):
            reduced = fit_to_budget(cloud, 1000, 0)
        self.assertEqual(reduced.size, 2 ** 20 // (8 * 3 * 1000))


@pytest.mark.unit
@pytest.mark.experiments
class TestRunners(unittest.TestCase):
    """Test cases for the sweep, rate and noise floor runners on tiny inputs."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def test_small_sweep(self):
        rows = run_sweep(_tiny_spec(), self.out)
        self.assertEqual(list(rows.columns), CSV_COLUMNS)
        self.assertEqual(len(rows), 3)
        self.assertTrue((rows["error"] == "").all())
        self.assertTrue((rows["prior_w2"] > 0).all())
        for name in ("sweep.csv", "summary.csv", "slopes.csv", "manifest.json"):
            self.assertTrue((self.out / name).exists(), name)
        manifest = json.loads((self.out / "manifest.json").read_text())
        self.assertEqual(manifest["command"], "bench2d sweep")
        self.assertEqual(manifest["failed_cells"], 0)
        self.assertEqual(manifest["spec"]["grid"], [16, 32, 64])
        self.assertIn("environment", manifest)

    def test_failed_cells_are_recorded(self):
        with patch("genprior.experiments.sweeps.train", side_effect=TrainingError("boom", 0)):
            rows = run_sweep(_tiny_spec())
        self.assertTrue((rows["error"] == "TrainingError: boom").all())
        self.assertTrue(rows["prior_w2"].isna().all())
        self.assertFalse(rows["bound_holds"].any())

    def test_empirical_rate(self):
        fit, rows = run_empirical_rate("gaussian", [8, 16, 32], repeats=2, n_ref=256, seed=1, out_dir=self.out)
        self.assertEqual(len(rows), 6)
        self.assertEqual(sorted(rows["n"].unique()), [8, 16, 32])
        self.assertTrue(math.isfinite(fit.slope))
        self.assertTrue((self.out / "rate.csv").exists())
        self.assertTrue((self.out / "rate_slope.csv").exists())
        with self.assertRaises(ConfigurationError):
            run_empirical_rate("gaussian", [8, 16, 32], n_ref=32)

    def test_two_sample_noise_floor(self):
        value = two_sample_noise_floor("gaussian", 64, 3)
        self.assertGreater(value, 0.0)
        self.assertEqual(value, two_sample_noise_floor("gaussian", 64, 3))

    def test_oracle_target(self):
        cloud = oracle_target(20000, 0)
        np.testing.assert_allclose(cloud.points.mean(axis=0), config.ORACLE_OFFSET, atol=0.05)
        matrix = np.array(config.ORACLE_MATRIX)
        np.testing.assert_allclose(np.cov(cloud.points.T), matrix @ matrix.T, atol=0.08)

    def test_prior_clouds(self):
        clouds = run_prior_clouds("gaussian", n=48, sample_size=32, cfg=TINY_TRAIN, seed=4)
        self.assertEqual(tuple(clouds), CLOUD_FILES)
        for name, cloud in clouds.items():
            self.assertEqual((cloud.size, cloud.dim), (48, 2), name)
            self.assertTrue(cloud.is_uniform, name)
        again = run_prior_clouds("gaussian", n=48, sample_size=32, cfg=TINY_TRAIN, seed=4)
        np.testing.assert_array_equal(again["posterior_approx"].points, clouds["posterior_approx"].points)
        with self.assertRaises(DomainError):
            run_prior_clouds("gaussian", n=0, cfg=TINY_TRAIN)


@pytest.mark.unit
@pytest.mark.experiments
class TestOutputs(unittest.TestCase):
    """Test cases for plots, manifests and the OT selftest."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def test_emit_plot(self):
        csv_path = self.out / "sweep.csv"
        _rows([16, 16, 32, 64], [0.5, 0.4, 0.3, 0.2], [0.3, 0.25, 0.2, 0.1]).to_csv(csv_path, index=False)
        svg = emit_plot(csv_path, "sweep_value", ["prior_w2", "posterior_w1"], self.out / "plots" / "sweep.svg")
        root = ET.parse(svg).getroot()
        self.assertTrue(root.tag.endswith("svg"))

    def test_emit_plot_errors(self):
        csv_path = self.out / "sweep.csv"
        _rows([16, 32], [0.5, 0.4], [0.3, 0.2]).to_csv(csv_path, index=False)
        with self.assertRaises(ConfigurationError):
            emit_plot(csv_path, "sweep_value", ["w9"], self.out / "a.svg")
        with self.assertRaises(ConfigurationError):
            emit_plot(self.out / "missing.csv", "sweep_value", ["prior_w2"], self.out / "a.svg")
        pd.DataFrame({"n": [1, 2], "w2": [0.0, -1.0]}).to_csv(self.out / "zeros.csv", index=False)
        with self.assertRaises(ConfigurationError):
            emit_plot(self.out / "zeros.csv", "n", ["w2"], self.out / "a.svg")

    def test_emit_scatter(self):
        clouds = {name: sample_benchmark("gaussian", 30, i) for i, name in enumerate(("a", "b", "c"))}
        svg = emit_scatter(clouds, self.out / "plots" / "clouds.svg", title="gaussian")
        root = ET.parse(svg).getroot()
        self.assertTrue(root.tag.endswith("svg"))

    def test_emit_scatter_errors(self):
        with self.assertRaises(ConfigurationError):
            emit_scatter({}, self.out / "a.svg")
        with self.assertRaises(ConfigurationError):
            emit_scatter({"line": PointCloud.uniform([[0.0], [1.0]])}, self.out / "a.svg")
        self.assertFalse((self.out / "a.svg").exists())

    def test_write_manifest(self):
        path = write_manifest(self.out / "run", {
            "train": TINY_TRAIN, "array": np.arange(3), "path": self.out, "value": np.float64(0.5),
            "missing": math.nan,
        })
        document = json.loads(path.read_text())
        self.assertEqual(document["train"]["epsilon_schedule"], [1.0, 0.2])
        self.assertEqual(document["array"], [0, 1, 2])
        self.assertEqual(document["path"], str(self.out))
        self.assertEqual(document["value"], 0.5)
        self.assertTrue(math.isnan(document["missing"]))
        self.assertIn("python_version", document["environment"])

    def test_selftest(self):
        result = run_selftest(trials=20, axiom_trials=10, seed=1)
        self.assertEqual(result["status"], "success")
        self.assertEqual(result["failures"], [])
        self.assertLess(result["max_oracle_gap"], 1e-8)


if __name__ == '__main__':
    unittest.main()
