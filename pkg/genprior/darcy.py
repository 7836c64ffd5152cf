"""Darcy flow forward problem on the unit square.

Solves ``-div(exp(u) grad p) = f`` with ``p = 0`` on the boundary. Grid
values sit on the nodes ``(x_i, y_j) = (i h, j h)`` with ``h = 1 / (m - 1)``
and ``values[i, j]`` belongs to ``(x_i, y_j)``. The log-permeability is
constant on the dual cell of each node, so the face between two neighbours
carries the harmonic mean of their permeabilities, giving the usual
five-point finite-volume stencil on the interior nodes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
import sympy as sp
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded
from scipy.sparse.linalg import LinearOperator, cg

from . import config
from .errors import ConfigurationError, DomainError, NumericalError
from .measures import make_rng

logger = logging.getLogger(__name__)

__all__ = [
    "DarcyConfig",
    "DarcyForwardOp",
    "GridField",
    "ObservationSet",
    "assemble",
    "blob_fields",
    "default_observation_points",
    "forward_map",
    "manufactured_case",
    "noise_sigma",
    "observe",
    "read_grid_csv",
    "solve",
]

SOLVERS = ("auto", "direct", "cg")


@dataclass(frozen=True, eq=False)
class GridField:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DomainError(f"Grid fields are square m x m arrays, got shape {values.shape}")
        if values.shape[0] < 3:
            raise DomainError("Grid size m must be at least 3")
        if not np.all(np.isfinite(values)):
            raise DomainError("Grid field values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, m: int, value: float = 0.0) -> "GridField":
        return cls(np.full((m, m), float(value)))

    @classmethod
    def from_flat(cls, flat, m: int) -> "GridField":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != m * m:
            raise DomainError(f"Expected {m * m} values for a {m}x{m} grid, got {flat.size}")
        return cls(flat.reshape(m, m))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m)

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Row-major values, one grid row per line, no header."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(self.values).to_csv(path, header=False, index=False, float_format="%.17g")
        return path

    def to_pgm(self, path: Union[str, Path]) -> Path:
        """8-bit binary grayscale image, min -> 0, max -> 255."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lo, hi = self.values.min(), self.values.max()
        span = hi - lo if hi > lo else 1.0
        pixels = np.round((self.values - lo) / span * 255.0).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5\n{self.m} {self.m}\n255\n".encode("ascii"))
            fh.write(pixels.tobytes())
        return path


def read_grid_csv(path: Union[str, Path]) -> GridField:
    return GridField(pd.read_csv(path, header=None).to_numpy(dtype=np.float64))


def _check_interior(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.ndim != 2 or points.shape[1] != 2:
        raise DomainError(f"Observation points must have shape (k, 2), got {points.shape}")
    if not np.all((points > 0.0) & (points < 1.0)):
        raise DomainError("Observation points must lie strictly inside the unit square")
    return points


@dataclass(frozen=True, eq=False)
class ObservationSet:
    points: np.ndarray
    values: np.ndarray
    sigma: float

    def __post_init__(self):
        points = _check_interior(self.points)
        values = np.atleast_1d(np.array(self.values, dtype=np.float64))
        if values.shape != (points.shape[0],):
            raise DomainError(f"{points.shape[0]} points but {values.size} values")
        if self.sigma < 0:
            raise DomainError("Observation noise must be nonnegative")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame({"x": self.points[:, 0], "y": self.points[:, 1], "value": self.values})
        frame.to_csv(path, index=False, float_format="%.17g")
        return path


# ----------------------------------------------------------------------------
# Assembly and solve
# ----------------------------------------------------------------------------

def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 2.0 * a * b / (a + b)


def _as_values(field) -> np.ndarray:
    return field.values if isinstance(field, GridField) else np.asarray(field, dtype=np.float64)


def assemble(u, source) -> Tuple[sparse.csr_matrix, np.ndarray]:
    """Five-point system ``A p_int = b`` on the (m-2)^2 interior nodes, natural ordering."""
    log_k, f = _as_values(u), _as_values(source)
    if log_k.shape != f.shape or log_k.ndim != 2 or log_k.shape[0] != log_k.shape[1]:
        raise DomainError(f"Permeability {log_k.shape} and source {f.shape} must be matching square grids")
    if not np.all(np.isfinite(log_k)) or not np.all(np.isfinite(f)):
        raise NumericalError("Non-finite permeability or source")
    m = log_k.shape[0]
    n = m - 2
    h = 1.0 / (m - 1)
    k = np.exp(log_k)
    kx = _harmonic(k[:-1, :], k[1:, :])    # face (i, j)-(i+1, j)
    ky = _harmonic(k[:, :-1], k[:, 1:])    # face (i, j)-(i, j+1)

    inner = slice(1, m - 1)
    diag = (kx[0:m - 2, inner] + kx[1:m - 1, inner] + ky[inner, 0:m - 2] + ky[inner, 1:m - 1]).ravel()
    off_one = -ky[inner, 1:m - 1].copy()
    off_one[:, -1] = 0.0
    off_one = off_one.ravel()[:-1]
    off_row = -kx[1:m - 2, inner].ravel()
    diagonals, offsets = [diag], [0]
    if off_one.size:
        diagonals += [off_one, off_one]
        offsets += [1, -1]
    if off_row.size:
        diagonals += [off_row, off_row]
        offsets += [n, -n]
    matrix = sparse.diags(diagonals, offsets, shape=(n * n, n * n), format="csr")
    rhs = f[inner, inner].ravel() * h * h
    return matrix, rhs


def _solve_direct(matrix: sparse.csr_matrix, rhs: np.ndarray, bandwidth: int) -> np.ndarray:
    size = matrix.shape[0]
    band = min(bandwidth, size - 1)
    ab = np.zeros((band + 1, size))
    for offset in range(band + 1):
        ab[band - offset, offset:] = matrix.diagonal(offset)
    try:
        factor = cholesky_banded(ab)
    except LinAlgError as exc:
        raise NumericalError(f"Darcy system is not positive definite: {exc}") from exc
    return cho_solve_banded((factor, False), rhs)


def _solve_cg(matrix: sparse.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    inv_diag = 1.0 / matrix.diagonal()
    preconditioner = LinearOperator(matrix.shape, matvec=lambda v: inv_diag * v)
    solution, info = cg(matrix, rhs, rtol=config.DARCY_RESIDUAL_TOLERANCE * 0.1, atol=0.0,
                        maxiter=20 * matrix.shape[0], M=preconditioner)
    if info != 0:
        raise NumericalError(f"Conjugate gradient did not converge (info={info})", iterations=info)
    return solution


def solve(u, source, solver: str = "auto") -> GridField:
    """Pressure field for log-permeability ``u`` and source ``source``."""
    if solver not in SOLVERS:
        raise ConfigurationError(f"Unknown Darcy solver '{solver}'")
    matrix, rhs = assemble(u, source)
    m = _as_values(u).shape[0]
    pressure = np.zeros((m, m))
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return GridField(pressure)

    direct = solver == "direct" or (solver == "auto" and m <= config.DARCY_DIRECT_SOLVER_MAX_M)
    interior = _solve_direct(matrix, rhs, m - 2) if direct else _solve_cg(matrix, rhs)
    residual = np.linalg.norm(matrix @ interior - rhs) / rhs_norm
    if not np.isfinite(residual) or residual > config.DARCY_RESIDUAL_TOLERANCE:
        raise NumericalError(f"Darcy solve residual {residual:.3e} above tolerance", violation=float(residual))
    pressure[1:m - 1, 1:m - 1] = interior.reshape(m - 2, m - 2)
    return GridField(pressure)


def manufactured_case(m: int, u_expr: str = "0", p_expr: str = "sin(pi*x)*sin(pi*y)"):
    """(u, f, p_exact) on an m x m grid with f = -div(exp(u) grad p_exact) derived symbolically."""
    x, y = sp.symbols("x y")
    u_sym = sp.sympify(u_expr, locals={"x": x, "y": y})
    p_sym = sp.sympify(p_expr, locals={"x": x, "y": y})
    k_sym = sp.exp(u_sym)
    f_sym = sp.simplify(-(sp.diff(k_sym * sp.diff(p_sym, x), x) + sp.diff(k_sym * sp.diff(p_sym, y), y)))

    nodes = np.linspace(0.0, 1.0, m)
    gx, gy = np.meshgrid(nodes, nodes, indexing="ij")

    def evaluate(expr) -> np.ndarray:
        values = sp.lambdify((x, y), expr, modules="numpy")(gx, gy)
        return np.broadcast_to(np.asarray(values, dtype=np.float64), (m, m)).copy()

    return GridField(evaluate(u_sym)), GridField(evaluate(f_sym)), GridField(evaluate(p_sym))


# ----------------------------------------------------------------------------
# Observations
# ----------------------------------------------------------------------------

def default_observation_points(count: int = config.DARCY_OBSERVATION_COUNT,
                               seed: int = config.DARCY_OBSERVATION_SEED) -> np.ndarray:
    lo, hi = config.DARCY_OBSERVATION_BOX
    return make_rng(seed).uniform(lo, hi, size=(count, 2))


def _interpolate(p: GridField, points: np.ndarray) -> np.ndarray:
    interpolator = RegularGridInterpolator((p.nodes, p.nodes), p.values, method="linear")
    return interpolator(points)


def observe(p: GridField, points, sigma: float, seed) -> ObservationSet:
    """Bilinear point values of ``p`` plus N(0, sigma^2) noise."""
    points = _check_interior(points)
    if sigma < 0:
        raise DomainError("Observation noise must be nonnegative")
    values = _interpolate(p, points)
    if sigma > 0:
        values = values + sigma * make_rng(seed).standard_normal(values.shape[0])
    return ObservationSet(points, values, sigma)


def noise_sigma(noiseless: np.ndarray, ratio: float) -> float:
    """Noise level giving the requested noise-to-signal ratio."""
    if not ratio > 0:
        raise DomainError("Noise-to-signal ratio must be positive")
    return float(ratio * np.std(noiseless))


# ----------------------------------------------------------------------------
# Forward map
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DarcyConfig:
    m: int = config.DARCY_GRID_SIZE
    source: Optional[GridField] = None
    points: Optional[np.ndarray] = None
    solver: str = "auto"

    def __post_init__(self):
        if self.m < 3:
            raise ConfigurationError("Darcy grid size must be at least 3")
        if self.solver not in SOLVERS:
            raise ConfigurationError(f"Unknown Darcy solver '{self.solver}'")
        source = GridField.constant(self.m, 1.0) if self.source is None else self.source
        if source.m != self.m:
            raise ConfigurationError(f"Source grid {source.m} does not match m = {self.m}")
        points = default_observation_points() if self.points is None else _check_interior(self.points)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "points", points)


def forward_map(u_flat, cfg: DarcyConfig) -> np.ndarray:
    """Noiseless pressure values at the observation points for a flattened log-permeability."""
    u_flat = np.asarray(u_flat, dtype=np.float64)
    if u_flat.shape != (cfg.m * cfg.m,):
        raise DomainError(f"Expected {cfg.m * cfg.m} log-permeability values, got shape {u_flat.shape}")
    if not np.all(np.isfinite(u_flat)):
        raise NumericalError("Non-finite log-permeability")
    pressure = solve(u_flat.reshape(cfg.m, cfg.m), cfg.source, cfg.solver)
    return _interpolate(pressure, cfg.points)


class DarcyForwardOp:
    """Forward operator adapter for likelihoods."""

    def __init__(self, cfg: DarcyConfig):
        self.cfg = cfg
        self.input_dim = cfg.m * cfg.m
        self.output_dim = cfg.points.shape[0]

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return forward_map(u, self.cfg)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.array([forward_map(u, self.cfg) for u in points])


# ----------------------------------------------------------------------------
# Synthetic prior dataset
# ----------------------------------------------------------------------------

def blob_fields(n: int, m: int = config.DARCY_GRID_SIZE, seed=config.DARCY_TRUTH_SEED) -> np.ndarray:
    """``n`` flattened m x m fields, each a sum of 1 to 3 Gaussian bumps."""
    if n < 1:
        raise DomainError("Dataset size must be at least 1")
    rng = make_rng(seed)
    nodes = np.linspace(0.0, 1.0, m)
    gx, gy = np.meshgrid(nodes, nodes, indexing="ij")
    counts = rng.integers(1, 4, size=n)
    centers = rng.uniform(0.2, 0.8, size=(n, 3, 2))
    widths = rng.uniform(0.05, 0.15, size=(n, 3))
    amplitudes = rng.uniform(1.0, 2.0, size=(n, 3)) * (np.arange(3)[None, :] < counts[:, None])
    dx = gx[None, None] - centers[:, :, 0, None, None]
    dy = gy[None, None] - centers[:, :, 1, None, None]
    bumps = amplitudes[:, :, None, None] * np.exp(-(dx ** 2 + dy ** 2) / (2.0 * widths[:, :, None, None] ** 2))
    return bumps.sum(axis=1).reshape(n, m * m)
