"""Command line interface: ``python -m genprior <group> <command> ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

from . import config
from .errors import LabError, describe
from .experiments import (
    CLOUD_FILES,
    SweepSpec,
    emit_plot,
    run_darcy,
    run_empirical_rate,
    run_oracle_inequality,
    run_prior_clouds,
    run_selftest,
    run_sweep,
    train_darcy_prior,
)
from .experiments.darcy_pipeline import default_darcy_train_config
from .measures import BENCHMARK_KINDS, BenchmarkDist
from .transport import TrainConfig

logger = logging.getLogger("genprior")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _add_train_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=config.DEFAULT_EPOCHS, help="Training epochs per stage")
    parser.add_argument("--batch-size", type=int, default=config.DEFAULT_BATCH_SIZE)
    parser.add_argument("--lr", type=float, default=config.DEFAULT_LEARNING_RATE, help="Learning rate")
    parser.add_argument("--stages", type=int, default=config.DEFAULT_STAGE_COUNT, help="Residual stages")
    parser.add_argument("--width", type=int, default=config.DEFAULT_HIDDEN_WIDTHS[0], help="Hidden layer width")
    parser.add_argument("--optimizer", choices=["sgd", "momentum", "adam"], default="sgd")
    parser.add_argument("--epsilon", type=_float_list, default=list(config.DEFAULT_EPSILON_SCHEDULE),
                        help="Sinkhorn epsilon schedule, first to last epoch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genprior",
                                     description="Generative transport priors for Bayesian inverse problems.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("--no-progress", action="store_true", help="Hide progress bars")
    groups = parser.add_subparsers(dest="group", required=True)

    # bench2d
    bench = groups.add_parser("bench2d", help="2D benchmark experiments").add_subparsers(dest="command", required=True)

    sweep = bench.add_parser("sweep", help="Posterior stability sweep over one training variable")
    sweep.add_argument("--var", choices=["sample-size", "width", "epochs"], required=True)
    sweep.add_argument("--dist", choices=BENCHMARK_KINDS, default="swissroll")
    sweep.add_argument("--grid", type=_int_list, required=True, help="Comma-separated grid values")
    sweep.add_argument("--repeats", type=int, default=config.DEFAULT_REPEATS)
    sweep.add_argument("--nref", type=int, default=config.DEFAULT_N_REF, help="Reference cloud size")
    sweep.add_argument("--sample-size", type=int, default=config.DEFAULT_TRAIN_REFERENCE_SIZE,
                       help="Training sample size for width and epoch sweeps")
    sweep.add_argument("--posterior-size", type=int, default=config.DEFAULT_POSTERIOR_SIZE)
    sweep.add_argument("--eval-size", type=int, default=config.DEFAULT_PRIOR_EVAL_SIZE)
    sweep.add_argument("--seed", type=int, default=config.DEFAULT_SWEEP_SEED)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", type=Path, required=True)
    _add_train_options(sweep)

    rate = bench.add_parser("rate", help="Empirical W2 convergence rate")
    rate.add_argument("--dist", choices=BENCHMARK_KINDS, required=True)
    rate.add_argument("--grid", type=_int_list, required=True)
    rate.add_argument("--repeats", type=int, default=config.DEFAULT_REPEATS)
    rate.add_argument("--nref", type=int, default=config.DEFAULT_N_REF)
    rate.add_argument("--seed", type=int, default=config.DEFAULT_SWEEP_SEED)
    rate.add_argument("--out", type=Path, required=True)

    oracle = bench.add_parser("oracle", help="Oracle inequality in the affine-realisable case")
    oracle.add_argument("--n", type=int, default=2 ** 11)
    oracle.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    oracle.add_argument("--nref", type=int, default=2 ** 13)
    oracle.add_argument("--out", type=Path, required=True)

    clouds = bench.add_parser("clouds", help="True and learned prior and posterior clouds with a scatter plot")
    clouds.add_argument("--dist", choices=BENCHMARK_KINDS, default="swissroll")
    clouds.add_argument("--n", type=int, default=config.DEFAULT_PRIOR_EVAL_SIZE, help="Points per cloud")
    clouds.add_argument("--sample-size", type=int, default=config.DEFAULT_TRAIN_REFERENCE_SIZE,
                        help="Training sample size")
    clouds.add_argument("--seed", type=int, default=config.DEFAULT_SWEEP_SEED)
    clouds.add_argument("--out", type=Path, required=True)
    _add_train_options(clouds)

    # darcy
    darcy = groups.add_parser("darcy", help="Darcy inverse problem").add_subparsers(dest="command", required=True)

    prior = darcy.add_parser("train-prior", help="Train the latent field generator")
    prior.add_argument("--out", type=Path, required=True, help="Generator file")
    prior.add_argument("--n", type=int, default=config.DARCY_DATASET_SIZE, help="Training fields")
    prior.add_argument("--m", type=int, default=config.DARCY_GRID_SIZE, help="Grid nodes per side")
    prior.add_argument("--latent-dim", type=int, default=config.DARCY_LATENT_DIM)
    prior.add_argument("--epochs", type=int, default=config.DARCY_TRAIN_EPOCHS)
    prior.add_argument("--seed", type=int, default=0)

    run = darcy.add_parser("run", help="Sample the latent posterior with adaptive pCN")
    run.add_argument("--noise", type=float, required=True, help="Noise-to-signal ratio")
    run.add_argument("--samples", type=int, required=True, help="Chain length")
    run.add_argument("--prior", type=Path, required=True, help="Generator file")
    run.add_argument("--thin", type=int, default=config.PCN_THIN)
    run.add_argument("--burn-fraction", type=float, default=config.PCN_BURN_FRACTION)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", type=Path, required=True)

    # ot
    ot_group = groups.add_parser("ot", help="Optimal transport checks").add_subparsers(dest="command", required=True)
    selftest = ot_group.add_parser("selftest", help="Exact solver against permutation enumeration")
    selftest.add_argument("--trials", type=int, default=200)
    selftest.add_argument("--axiom-trials", type=int, default=100)
    selftest.add_argument("--seed", type=int, default=0)

    plot = groups.add_parser("plot", help="Log-log SVG plot of a result CSV")
    plot.add_argument("--csv", type=Path, required=True)
    plot.add_argument("--x", required=True, help="Column on the x axis")
    plot.add_argument("--y", required=True, help="Comma-separated y columns")
    plot.add_argument("--out", type=Path, required=True)

    serve = groups.add_parser("serve", help="Start the lab API")
    serve.add_argument("--host", default=config.LAB_HOST)
    serve.add_argument("--port", type=int, default=config.LAB_PORT)
    return parser


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        stage_count=args.stages,
        hidden_widths=(args.width, args.width),
        optimizer=args.optimizer,
        epsilon_schedule=tuple(args.epsilon),
    )


def _plot_quietly(csv_path: Path, x_col: str, y_cols: Sequence[str], out_svg: Path) -> None:
    try:
        emit_plot(csv_path, x_col, y_cols, out_svg)
    except LabError as e:
        logger.warning("No plot written: %s", e)


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = SweepSpec(
        variable=args.var.replace("-", "_"),
        grid=tuple(args.grid),
        dist=BenchmarkDist(args.dist),
        repeats=args.repeats,
        train=_train_config(args),
        n_ref=args.nref,
        seed0=args.seed,
        sample_size=args.sample_size,
        prior_eval_size=args.eval_size,
        posterior_size=args.posterior_size,
        workers=args.workers,
        show_progress=not args.no_progress,
    )
    rows = run_sweep(spec, args.out)
    _plot_quietly(args.out / "sweep.csv", "sweep_value", ["prior_w2", "posterior_w1"], args.out / "sweep.svg")
    failed = int((rows["error"] != "").sum())
    print(f"Wrote {len(rows)} rows to {args.out / 'sweep.csv'} ({failed} failed)")
    return 0 if failed == 0 else 1


def cmd_rate(args: argparse.Namespace) -> int:
    fit, _ = run_empirical_rate(args.dist, args.grid, args.repeats, args.nref, args.seed, args.out,
                                show_progress=not args.no_progress)
    _plot_quietly(args.out / "rate.csv", "n", ["w2"], args.out / "rate.svg")
    print(f"{args.dist}: slope {fit.slope:.4f}, intercept {fit.intercept:.4f}, r^2 {fit.r_squared:.4f}")
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    rows = run_oracle_inequality(n=args.n, seeds=args.seeds, n_ref=args.nref, out_dir=args.out)
    for row in rows.itertuples():
        print(f"seed {row.seed}: fitted {row.fitted_w2:.4f} <= bound {row.bound:.4f}  {'ok' if row.holds else 'FAIL'}")
    return 0 if rows["holds"].all() else 1


def cmd_clouds(args: argparse.Namespace) -> int:
    cfg = replace(_train_config(args), show_progress=not args.no_progress)
    run_prior_clouds(args.dist, n=args.n, sample_size=args.sample_size, cfg=cfg, seed=args.seed, out_dir=args.out)
    print(f"Wrote {', '.join(f'{name}.csv' for name in CLOUD_FILES)} and clouds.svg to {args.out}")
    return 0


def cmd_train_prior(args: argparse.Namespace) -> int:
    cfg = replace(default_darcy_train_config(args.seed), epochs=args.epochs, show_progress=not args.no_progress)
    _, path = train_darcy_prior(args.out, n=args.n, m=args.m, latent_dim=args.latent_dim, cfg=cfg, seed=args.seed)
    print(f"Generator saved to {path}")
    return 0


def cmd_darcy_run(args: argparse.Namespace) -> int:
    manifest = run_darcy(args.noise, args.samples, args.prior, args.seed, args.out, thin=args.thin,
                         burn_fraction=args.burn_fraction, show_progress=not args.no_progress)
    print(f"Acceptance rate {manifest['acceptance_rate']:.3f}, final beta {manifest['beta_final']:.4g}")
    print(f"Results written to {args.out}")
    return 0


def cmd_selftest(args: argparse.Namespace) -> int:
    result = run_selftest(args.trials, args.axiom_trials, args.seed)
    print(f"Max oracle gap: {result['max_oracle_gap']:.3e}")
    for line in result["failures"]:
        print(f"  {line}")
    print(result["message"])
    return 0 if result["status"] == "success" else 1


def cmd_plot(args: argparse.Namespace) -> int:
    path = emit_plot(args.csv, args.x, [c for c in args.y.split(",") if c], args.out)
    print(f"Plot written to {path}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .app import serve

    serve(args.host, args.port)
    return 0


COMMANDS = {
    ("bench2d", "sweep"): cmd_sweep,
    ("bench2d", "rate"): cmd_rate,
    ("bench2d", "oracle"): cmd_oracle,
    ("bench2d", "clouds"): cmd_clouds,
    ("darcy", "train-prior"): cmd_train_prior,
    ("darcy", "run"): cmd_darcy_run,
    ("ot", "selftest"): cmd_selftest,
    ("plot", None): cmd_plot,
    ("serve", None): cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    handler = COMMANDS[(args.group, getattr(args, "command", None))]
    try:
        return handler(args)
    except LabError as e:
        print(f"Error: {describe(e)}", file=sys.stderr)
        return 2
