"""Sweep runners, the Darcy pipeline and their file outputs."""
from __future__ import annotations

from .darcy_pipeline import ground_truth_field, run_darcy, train_darcy_prior
from .manifest import write_manifest
from .plotting import emit_plot, emit_scatter
from .selftest import run_selftest
from .sweeps import (
    CLOUD_FILES,
    CSV_COLUMNS,
    SlopeFit,
    SweepSpec,
    fit_slope,
    run_empirical_rate,
    run_oracle_inequality,
    run_prior_clouds,
    run_sweep,
    summarise_sweep,
    sweep_slopes,
    two_sample_noise_floor,
)

__all__ = [
    "CLOUD_FILES",
    "CSV_COLUMNS",
    "SlopeFit",
    "SweepSpec",
    "emit_plot",
    "emit_scatter",
    "fit_slope",
    "ground_truth_field",
    "run_darcy",
    "run_empirical_rate",
    "run_oracle_inequality",
    "run_prior_clouds",
    "run_selftest",
    "run_sweep",
    "summarise_sweep",
    "sweep_slopes",
    "train_darcy_prior",
    "two_sample_noise_floor",
    "write_manifest",
]
