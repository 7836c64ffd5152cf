"""Darcy inverse problem: prior generator training and latent pCN runs."""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .. import config
from ..bayes import LikelihoodSpec
from ..darcy import DarcyConfig, DarcyForwardOp, GridField, blob_fields, noise_sigma, observe, solve
from ..errors import ConfigurationError, DegeneracyError, DomainError
from ..measures import PointCloud, make_rng
from ..mcmc import ChainResult, PcnConfig, acf, ess, pcn_run
from ..transport import ResidualMapStack, TrainConfig, load_map, save_map, train
from .manifest import write_manifest

logger = logging.getLogger(__name__)


def default_darcy_train_config(seed: int = 0) -> TrainConfig:
    return TrainConfig(
        epochs=config.DARCY_TRAIN_EPOCHS,
        batch_size=config.DARCY_TRAIN_BATCH_SIZE,
        learning_rate=config.DARCY_TRAIN_LEARNING_RATE,
        stage_count=config.DARCY_TRAIN_STAGES,
        hidden_widths=config.DARCY_TRAIN_HIDDEN_WIDTHS,
        epsilon_schedule=config.DARCY_EPSILON_SCHEDULE,
        optimizer="adam",
        seed=seed,
    )


def train_darcy_prior(out_path: Union[str, Path], n: int = config.DARCY_DATASET_SIZE,
                      m: int = config.DARCY_GRID_SIZE, latent_dim: int = config.DARCY_LATENT_DIM,
                      cfg: Optional[TrainConfig] = None, seed: int = 0) -> Tuple[ResidualMapStack, Path]:
    """Train a latent generator on blob log-permeability fields and save it."""
    data_seed, latent_seed, train_seed = (
        int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(3)
    )
    cfg = default_darcy_train_config(train_seed) if cfg is None else cfg
    target = PointCloud.uniform(blob_fields(n, m, data_seed))
    reference = PointCloud.uniform(make_rng(latent_seed).standard_normal((n, latent_dim)))
    stack, history = train(target, reference, cfg)
    path = save_map(stack, out_path)
    write_manifest(Path(out_path).parent, {
        "command": "darcy train-prior", "n": n, "m": m, "latent_dim": latent_dim, "seed": seed,
        "train": cfg, "final_loss": history[-1], "generator": path,
    })
    logger.info("Saved Darcy prior generator to %s (final loss %.4g)", path, history[-1])
    return stack, path


def _write_field(field: GridField, out_dir: Path, name: str) -> None:
    field.to_csv(out_dir / f"{name}.csv")
    field.to_pgm(out_dir / f"{name}.pgm")


def _chain_diagnostics(chain: ChainResult, max_lag: int) -> Tuple[pd.DataFrame, pd.DataFrame]:
    samples = chain.latent_samples
    lag = max(1, min(max_lag, samples.shape[0] - 1))
    acfs, sizes = {"lag": np.arange(lag + 1)}, []
    for k in range(samples.shape[1]):
        name = f"z{k + 1}"
        try:
            acfs[name] = acf(samples[:, k], lag)
            sizes.append({"coordinate": name, "ess": ess(samples[:, k])})
        except (DegeneracyError, DomainError):
            acfs[name] = np.full(lag + 1, math.nan)
            sizes.append({"coordinate": name, "ess": math.nan})
    return pd.DataFrame(acfs), pd.DataFrame.from_records(sizes)


def ground_truth_field(m: int = config.DARCY_GRID_SIZE, seed: int = config.DARCY_TRUTH_SEED) -> GridField:
    return GridField.from_flat(blob_fields(1, m, seed)[0], m)


def run_darcy(noise_ratio: float, n_mcmc: int, generator_path: Union[str, Path], seed: int,
              out_dir: Union[str, Path], darcy_cfg: Optional[DarcyConfig] = None,
              thin: int = config.PCN_THIN, burn_fraction: float = config.PCN_BURN_FRACTION,
              show_progress: bool = False) -> Dict[str, Any]:
    """Synthesise data from a ground-truth field, sample the latent posterior and write the results.

    Writes the posterior mean and standard deviation fields, evenly spaced
    posterior samples, per-coordinate ACF and ESS tables and ``manifest.json``.
    """
    if not noise_ratio > 0:
        raise ConfigurationError("noise_ratio must be positive")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    generator_path = Path(generator_path)
    if not generator_path.exists():
        raise ConfigurationError(f"Generator file {generator_path} does not exist")

    manifest: Dict[str, Any] = {
        "command": "darcy run", "noise_ratio": noise_ratio, "n_mcmc": n_mcmc, "seed": seed,
        "generator": generator_path, "thin": thin, "burn_fraction": burn_fraction, "status": "running",
    }
    try:
        generator = load_map(generator_path)
        darcy_cfg = DarcyConfig(m=int(round(math.sqrt(generator.output_dim)))) if darcy_cfg is None else darcy_cfg
        if generator.output_dim != darcy_cfg.m ** 2:
            raise ConfigurationError(
                f"Generator outputs {generator.output_dim} values, the Darcy grid has {darcy_cfg.m ** 2}"
            )
        truth = ground_truth_field(darcy_cfg.m)
        pressure = solve(truth, darcy_cfg.source, darcy_cfg.solver)
        noiseless = observe(pressure, darcy_cfg.points, 0.0, seed)
        sigma = noise_sigma(noiseless.values, noise_ratio)
        data = observe(pressure, darcy_cfg.points, sigma, seed)
        manifest.update({"m": darcy_cfg.m, "sigma": sigma, "observation_count": len(data.values)})
        _write_field(truth, out_dir, "truth")
        data.to_csv(out_dir / "observations.csv")

        spec = LikelihoodSpec(DarcyForwardOp(darcy_cfg), data.values, sigma)
        pcn_cfg = PcnConfig(n_samples=n_mcmc, burn_fraction=burn_fraction, thin=thin, seed=seed,
                            show_progress=show_progress)
        chain = pcn_run(generator, spec, pcn_cfg)

        fields = chain.pushed_samples
        m = darcy_cfg.m
        _write_field(GridField.from_flat(fields.mean(axis=0), m), out_dir, "posterior_mean")
        _write_field(GridField.from_flat(fields.std(axis=0), m), out_dir, "posterior_std")
        picks = np.unique(np.linspace(0, fields.shape[0] - 1, config.DARCY_SNAPSHOT_COUNT).astype(int))
        for k, index in enumerate(picks):
            _write_field(GridField.from_flat(fields[index], m), out_dir, f"sample_{k:02d}")

        acf_table, ess_table = _chain_diagnostics(chain, config.DARCY_ACF_MAX_LAG)
        acf_table.to_csv(out_dir / "acf.csv", index=False)
        ess_table.to_csv(out_dir / "ess.csv", index=False)

        manifest.update({
            "status": "success",
            "acceptance_rate": chain.acceptance_rate,
            "beta_final": chain.beta_final,
            "retained_samples": int(fields.shape[0]),
            "adaptations": [a.__dict__ for a in chain.adaptations],
            "posterior_std_mean": float(fields.std(axis=0).mean()),
            "snapshot_indices": picks,
        })
        logger.info("Darcy run: acceptance %.3f, beta %.4g", chain.acceptance_rate, chain.beta_final)
    except Exception as exc:
        manifest.update({"status": "error", "message": f"{type(exc).__name__}: {exc}"})
        write_manifest(out_dir, manifest)
        raise
    write_manifest(out_dir, manifest)
    return manifest
