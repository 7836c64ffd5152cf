"""Benchmark sweeps: generator training against sample size, width or epochs.

Each sweep cell trains a generator on a fresh benchmark sample, measures the
prior W2 error against a large reference cloud, the W1 error between the
importance-resampled posteriors and the plug-in stability constant. Cells
are independent and seeded from ``SeedSequence(seed0)``, so the CSV is
identical whatever the number of workers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from .. import config
from ..bayes import LikelihoodSpec, importance_posterior, stability_report
from ..errors import ConfigurationError, DomainError, describe
from ..measures import BenchmarkDist, PointCloud, make_rng, sample_benchmark, spawn_seeds, subsample_cloud
from ..ot import exact_wp, memory_budget_bytes
from ..transport import TrainConfig, pushforward_cloud, train
from .manifest import write_manifest
from .plotting import emit_scatter

logger = logging.getLogger(__name__)

SWEEP_VARIABLES = ("sample_size", "width", "epochs")
CSV_COLUMNS = [
    "dist", "sweep_var", "sweep_value", "seed", "prior_w2", "posterior_w1",
    "cstab", "ratio", "noise_floor", "bound_holds", "error",
]
METRICS = ("prior_w2", "posterior_w1", "cstab", "ratio")


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> SlopeFit:
    """Least-squares line through (log x, log y)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.size < 3:
        raise DomainError("A slope fit needs at least 3 (x, y) pairs")
    if np.any(~np.isfinite(xs)) or np.any(xs <= 0) or np.any(~np.isfinite(ys)) or np.any(ys <= 0):
        raise DomainError("Log-log fits need finite positive x and y values")
    fit = stats.linregress(np.log(xs), np.log(ys))
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2))


# ----------------------------------------------------------------------------
# Sweep specification
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: Tuple[int, ...]
    dist: BenchmarkDist = BenchmarkDist("swissroll")
    repeats: int = config.DEFAULT_REPEATS
    train: TrainConfig = field(default_factory=TrainConfig)
    likelihood: LikelihoodSpec = field(default_factory=LikelihoodSpec.benchmark_2d)
    n_ref: int = config.DEFAULT_N_REF
    seed0: int = config.DEFAULT_SWEEP_SEED
    sample_size: int = config.DEFAULT_TRAIN_REFERENCE_SIZE   # N for width and epoch sweeps
    train_reference_size: int = config.DEFAULT_TRAIN_REFERENCE_SIZE
    prior_eval_size: int = config.DEFAULT_PRIOR_EVAL_SIZE
    posterior_size: int = config.DEFAULT_POSTERIOR_SIZE
    workers: int = 1
    show_progress: bool = False

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigurationError(f"Unknown sweep variable '{self.variable}'. Choose one of {SWEEP_VARIABLES}")
        grid = tuple(int(v) for v in self.grid)
        if not grid or any(v < 1 for v in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError("Sweep grid must be a strictly increasing list of positive counts")
        object.__setattr__(self, "grid", grid)
        if self.repeats < 1:
            raise ConfigurationError("repeats must be at least 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if min(self.n_ref, self.train_reference_size, self.prior_eval_size, self.posterior_size) < 1:
            raise ConfigurationError("Cloud sizes must be positive")

    def cell_setup(self, value: int) -> Tuple[int, TrainConfig]:
        """Training sample size and configuration for one grid value."""
        if self.variable == "sample_size":
            return value, self.train
        if self.variable == "width":
            return self.sample_size, replace(self.train, hidden_widths=(value, value))
        return self.sample_size, replace(self.train, epochs=value)


@dataclass(frozen=True)
class SweepCell:
    index: int
    value: int
    repeat: int
    seed: int


def sweep_cells(spec: SweepSpec) -> List[SweepCell]:
    children = np.random.SeedSequence(spec.seed0).spawn(len(spec.grid) * spec.repeats)
    cells = []
    for i, value in enumerate(spec.grid):
        for r in range(spec.repeats):
            index = i * spec.repeats + r
            cells.append(SweepCell(index, value, r, int(children[index].generate_state(1)[0])))
    return cells


def fit_to_budget(cloud: PointCloud, partner_size: int, seed, copies: int = 3) -> PointCloud:
    """Subsample ``cloud`` so that ``copies`` dense matrices against a partner fit the OT budget.

    The budget ignores current machine load, so reruns pick the same atoms.
    """
    limit = max(1, memory_budget_bytes() // (8 * copies * max(partner_size, 1)))
    if cloud.size <= limit:
        return cloud
    logger.warning("Reference cloud of %d points exceeds the OT memory budget; using %d points", cloud.size, limit)
    return subsample_cloud(cloud, limit, seed)


def _latent_cloud(n: int, dim: int, seed) -> PointCloud:
    return PointCloud.uniform(make_rng(seed).standard_normal((n, dim)))


def run_cell(spec: SweepSpec, reference: PointCloud, cell: SweepCell) -> Dict[str, object]:
    """Train, evaluate and report one cell; failures become an error tag in the row."""
    row: Dict[str, object] = {
        "dist": spec.dist.kind, "sweep_var": spec.variable, "sweep_value": cell.value, "seed": cell.seed,
    }
    data_seed, train_seed, latent_seed, eval_seed, report_seed = (
        int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cell.seed).spawn(5)
    )
    try:
        n, cfg = spec.cell_setup(cell.value)
        target = sample_benchmark(spec.dist, n, data_seed)
        latent = _latent_cloud(spec.train_reference_size, target.dim, latent_seed)
        stack, _ = train(target, latent, replace(cfg, seed=train_seed, show_progress=False))
        approx = pushforward_cloud(stack, _latent_cloud(spec.prior_eval_size, target.dim, eval_seed))
        report = stability_report(reference, approx, spec.likelihood, spec.posterior_size, report_seed)
        row.update(report.as_row())
        row["error"] = ""
    except Exception as exc:  # a failing cell must not end the sweep
        logger.warning("Cell %d (%s=%s) failed: %s", cell.index, spec.variable, cell.value, exc)
        row.update({metric: math.nan for metric in ("prior_w2", "posterior_w1", "cstab", "ratio", "noise_floor")})
        row["bound_holds"] = False
        row["error"] = describe(exc)
    return row


def _run_indexed(args):
    spec, reference, cell = args
    return cell.index, run_cell(spec, reference, cell)


def run_sweep(spec: SweepSpec, out_dir: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """One row per (grid value, repeat), ordered by cell index."""
    reference = sample_benchmark(spec.dist, spec.n_ref, spec.seed0)
    reference = fit_to_budget(reference, spec.prior_eval_size, spec.seed0)
    cells = sweep_cells(spec)
    jobs = [(spec, reference, cell) for cell in cells]

    results: Dict[int, Dict[str, object]] = {}
    if spec.workers == 1:
        iterator = map(_run_indexed, jobs)
        if spec.show_progress:
            iterator = tqdm(iterator, total=len(jobs), desc=f"{spec.dist.kind} {spec.variable}")
        for index, row in iterator:
            results[index] = row
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            iterator = pool.map(_run_indexed, jobs)
            if spec.show_progress:
                iterator = tqdm(iterator, total=len(jobs), desc=f"{spec.dist.kind} {spec.variable}")
            for index, row in iterator:
                results[index] = row

    rows = pd.DataFrame([results[i] for i in sorted(results)], columns=CSV_COLUMNS)
    audited = rows[rows["error"] == ""]
    if len(audited):
        held = audited["bound_holds"].astype(bool).mean()
        logger.info("Stability bound held in %.0f%% of %d cells", 100 * held, len(audited))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows.to_csv(out_dir / "sweep.csv", index=False)
        summary = summarise_sweep(rows)
        summary.to_csv(out_dir / "summary.csv", index=False)
        slopes = sweep_slopes(summary, spec.dist.kind, spec.variable)
        slopes.to_csv(out_dir / "slopes.csv", index=False)
        write_manifest(out_dir, {
            "command": "bench2d sweep",
            "spec": spec,
            "reference_size": reference.size,
            "cells": [cell.__dict__ for cell in cells],
            "failed_cells": int((rows["error"] != "").sum()),
        })
    return rows


def summarise_sweep(rows: pd.DataFrame) -> pd.DataFrame:
    """Per grid value mean and standard error of every metric, errored rows excluded."""
    ok = rows[rows["error"].fillna("") == ""]
    grouped = ok.groupby("sweep_value")
    summary = pd.DataFrame({"sweep_value": sorted(rows["sweep_value"].unique())}).set_index("sweep_value")
    summary["n"] = grouped.size()
    for metric in METRICS:
        summary[f"{metric}_mean"] = grouped[metric].mean()
        summary[f"{metric}_se"] = grouped[metric].sem()
    summary["n"] = summary["n"].fillna(0).astype(int)
    return summary.reset_index()


def sweep_slopes(summary: pd.DataFrame, dist: str, variable: str) -> pd.DataFrame:
    """Log-log slopes of the mean prior W2 and posterior W1, with reference slopes alongside."""
    reference = config.REFERENCE_SLOPES.get(dist, {}).get(variable, (math.nan, math.nan))
    records = []
    for metric, ref in zip(("prior_w2", "posterior_w1"), reference):
        column = summary[["sweep_value", f"{metric}_mean"]].dropna()
        try:
            fit = fit_slope(column["sweep_value"], column[f"{metric}_mean"])
        except DomainError:
            fit = SlopeFit(math.nan, math.nan, math.nan)
        records.append({
            "metric": metric, "slope": fit.slope, "intercept": fit.intercept,
            "r_squared": fit.r_squared, "reference_slope": ref,
        })
    return pd.DataFrame.from_records(records)


# ----------------------------------------------------------------------------
# Empirical rate and oracle inequality
# ----------------------------------------------------------------------------

def two_sample_noise_floor(dist: Union[BenchmarkDist, str], n: int, seed) -> float:
    """W2 between two independent n-point draws of the same distribution."""
    first, second = spawn_seeds(seed, 2)
    return exact_wp(sample_benchmark(dist, n, first), sample_benchmark(dist, n, second), 2)[0]


def run_empirical_rate(dist: Union[BenchmarkDist, str], grid: Sequence[int], repeats: int = config.DEFAULT_REPEATS,
                       n_ref: int = config.DEFAULT_N_REF, seed: int = config.DEFAULT_SWEEP_SEED,
                       out_dir: Optional[Union[str, Path]] = None,
                       show_progress: bool = False) -> Tuple[SlopeFit, pd.DataFrame]:
    """Slope of E W2(mu^N, mu_ref) against N on a log-log scale."""
    if isinstance(dist, str):
        dist = BenchmarkDist(dist)
    grid = [int(n) for n in grid]
    if repeats < 1:
        raise ConfigurationError("repeats must be at least 1")
    if n_ref <= max(grid):
        raise ConfigurationError(f"n_ref = {n_ref} must exceed the largest sample size {max(grid)}")
    reference = fit_to_budget(sample_benchmark(dist, n_ref, seed), max(grid), seed, copies=2)

    children = np.random.SeedSequence(seed).spawn(len(grid) * repeats)
    records = []
    cells = [(n, r) for n in grid for r in range(repeats)]
    iterator = tqdm(cells, desc=f"rate {dist.kind}") if show_progress else cells
    for index, (n, r) in enumerate(iterator):
        sample = sample_benchmark(dist, n, children[index])
        w2, _ = exact_wp(sample, reference, 2)
        records.append({"dist": dist.kind, "n": n, "repeat": r, "w2": w2})
    rows = pd.DataFrame.from_records(records)
    means = rows.groupby("n")["w2"].mean()
    fit = fit_slope(means.index.to_numpy(), means.to_numpy())
    logger.info("%s: W2 rate slope %.3f (r^2 %.3f)", dist.kind, fit.slope, fit.r_squared)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows.to_csv(out_dir / "rate.csv", index=False)
        pd.DataFrame([{"dist": dist.kind, **fit.__dict__}]).to_csv(out_dir / "rate_slope.csv", index=False)
        write_manifest(out_dir, {
            "command": "bench2d rate", "dist": dist, "grid": grid, "repeats": repeats,
            "n_ref": n_ref, "reference_size": reference.size, "seed": seed, "fit": fit,
        })
    return fit, rows


def oracle_target(n: int, seed) -> PointCloud:
    """Samples of the affine image A z + b of a standard Gaussian."""
    matrix = np.array(config.ORACLE_MATRIX)
    z = make_rng(seed).standard_normal((n, matrix.shape[1]))
    return PointCloud.uniform(z @ matrix.T + np.array(config.ORACLE_OFFSET))


def run_oracle_inequality(n: int = 2 ** 11, seeds: Sequence[int] = (0, 1, 2, 3, 4),
                          n_ref: int = 2 ** 13, eval_size: int = 2 ** 11,
                          cfg: Optional[TrainConfig] = None,
                          out_dir: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """Affine-realisable check of W2(T#eta, mu_ref) <= 2 W2(mu^N, mu_ref) + 2 floor.

    The target is an affine image of a Gaussian and the map class is the
    affine lift alone, so the best map in the class reproduces the target
    exactly and the bound isolates the estimation error.
    """
    if cfg is None:
        cfg = TrainConfig(epochs=300, batch_size=256, learning_rate=0.05, stage_count=0,
                          optimizer="adam", affine_lift=True, epsilon_schedule=(1.0, 0.05))
    records = []
    for seed in seeds:
        ref_seed, data_seed, latent_seed, eval_seed, floor_seed, train_seed = (
            int(s.generate_state(1)[0]) for s in np.random.SeedSequence(int(seed)).spawn(6)
        )
        reference = fit_to_budget(oracle_target(n_ref, ref_seed), max(n, eval_size), ref_seed, copies=2)
        sample = oracle_target(n, data_seed)
        stack, _ = train(sample, _latent_cloud(n, sample.dim, latent_seed), replace(cfg, seed=train_seed))
        pushed = pushforward_cloud(stack, _latent_cloud(eval_size, sample.dim, eval_seed))
        fitted_w2, _ = exact_wp(pushed, reference, 2)
        sample_w2, _ = exact_wp(sample, reference, 2)
        first, second = np.random.SeedSequence(floor_seed).spawn(2)
        floor, _ = exact_wp(oracle_target(eval_size, first), oracle_target(eval_size, second), 2)
        bound = 2.0 * sample_w2 + 2.0 * floor
        records.append({
            "seed": int(seed), "n": n, "fitted_w2": fitted_w2, "sample_w2": sample_w2,
            "noise_floor": floor, "bound": bound, "holds": bool(fitted_w2 <= bound),
        })
    rows = pd.DataFrame.from_records(records)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows.to_csv(out_dir / "oracle.csv", index=False)
        write_manifest(out_dir, {"command": "bench2d oracle", "n": n, "seeds": list(seeds),
                                 "n_ref": n_ref, "eval_size": eval_size, "train": cfg})
    return rows


CLOUD_FILES = ("prior_true", "prior_approx", "posterior_true", "posterior_approx")


def run_prior_clouds(dist: Union[BenchmarkDist, str], n: int = config.DEFAULT_PRIOR_EVAL_SIZE,
                     sample_size: int = config.DEFAULT_TRAIN_REFERENCE_SIZE,
                     cfg: Optional[TrainConfig] = None, likelihood: Optional[LikelihoodSpec] = None,
                     seed: int = config.DEFAULT_SWEEP_SEED,
                     out_dir: Optional[Union[str, Path]] = None) -> Dict[str, PointCloud]:
    """True and learned prior clouds with their resampled posteriors, ``n`` points each.

    With ``out_dir`` each cloud is written to ``<name>.csv`` next to a
    ``clouds.svg`` scatter and the manifest.
    """
    if n < 1 or sample_size < 1:
        raise DomainError(f"Cloud and sample sizes must be positive, got n={n}, sample_size={sample_size}")
    dist = BenchmarkDist(dist) if isinstance(dist, str) else dist
    cfg = cfg or TrainConfig()
    likelihood = likelihood or LikelihoodSpec.benchmark_2d()
    true_seed, data_seed, latent_seed, eval_seed, train_seed, post_seed = (
        int(s.generate_state(1)[0]) for s in np.random.SeedSequence(int(seed)).spawn(6)
    )
    prior_true = sample_benchmark(dist, n, true_seed)
    target = sample_benchmark(dist, sample_size, data_seed)
    stack, history = train(target, _latent_cloud(sample_size, target.dim, latent_seed),
                           replace(cfg, seed=train_seed))
    prior_approx = pushforward_cloud(stack, _latent_cloud(n, target.dim, eval_seed))
    # both posteriors share one resampling seed
    clouds = {
        "prior_true": prior_true,
        "prior_approx": prior_approx,
        "posterior_true": importance_posterior(prior_true, likelihood, n, post_seed)[1],
        "posterior_approx": importance_posterior(prior_approx, likelihood, n, post_seed)[1],
    }
    logger.info("Prior clouds for %s: %d points, final divergence %.4g", dist.kind, n,
                history[-1] if len(history) else math.nan)
    if out_dir is not None:
        out_dir = Path(out_dir)
        for name in CLOUD_FILES:
            clouds[name].to_csv(out_dir / f"{name}.csv")
        emit_scatter(clouds, out_dir / "clouds.svg", title=dist.kind)
        write_manifest(out_dir, {"command": "bench2d clouds", "dist": dist, "n": n, "sample_size": sample_size,
                                 "seed": int(seed), "sigma": likelihood.sigma, "train": cfg})
    return clouds
