"""SVG plots: log-log curves of sweep output and scatter panels of point clouds."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ..errors import ConfigurationError  # noqa: E402
from ..measures import PointCloud  # noqa: E402


def emit_plot(csv_path: Union[str, Path], x_col: str, y_cols: Sequence[str],
              out_svg: Union[str, Path]) -> Path:
    """One curve per y column: mean over repeated x values with standard-error bars."""
    try:
        frame = pd.read_csv(csv_path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ConfigurationError(f"Cannot read {csv_path}: {exc}") from exc
    if isinstance(y_cols, str):
        y_cols = [y_cols]
    missing = [c for c in [x_col, *y_cols] if c not in frame.columns]
    if missing:
        raise ConfigurationError(f"{csv_path}: missing column(s) {', '.join(missing)}")

    grouped = frame.groupby(x_col)[list(y_cols)]
    means, errors = grouped.mean(), grouped.sem().fillna(0.0)
    positive = means[(means > 0) & np.isfinite(means)]
    if means.empty or positive.isna().all().all():
        raise ConfigurationError(f"{csv_path}: no positive finite values to plot")

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for col in y_cols:
        ax.errorbar(means.index, means[col], yerr=errors[col], fmt="o-", capsize=3, label=col)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x_col)
    ax.set_ylabel("distance")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()

    out_svg = Path(out_svg)
    out_svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_svg, format="svg")
    plt.close(fig)
    return out_svg


def emit_scatter(clouds: Mapping[str, PointCloud], out_svg: Union[str, Path],
                 title: Optional[str] = None) -> Path:
    """One panel per named 2D cloud, two panels per row, shared axes."""
    if not clouds:
        raise ConfigurationError("No clouds to plot")
    bad = [name for name, cloud in clouds.items() if cloud.dim != 2]
    if bad:
        raise ConfigurationError(f"Scatter panels need 2D clouds: {', '.join(bad)}")

    cols = min(2, len(clouds))
    rows = -(-len(clouds) // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 4 * rows), sharex=True, sharey=True, squeeze=False)
    for ax, (name, cloud) in zip(axes.flat, clouds.items()):
        ax.scatter(cloud.points[:, 0], cloud.points[:, 1], s=2, alpha=0.4)
        ax.set_title(name)
        ax.grid(alpha=0.3)
    for ax in list(axes.flat)[len(clouds):]:
        ax.set_visible(False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()

    out_svg = Path(out_svg)
    out_svg.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_svg, format="svg")
    plt.close(fig)
    return out_svg
