"""Empirical measures, benchmark samplers, moments and tail trimming.

Every prior, posterior and pushforward in the lab is a :class:`PointCloud`:
a finite set of atoms in R^d with nonnegative weights summing to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from . import config
from .errors import ConfigurationError, DomainError

__all__ = [
    "BENCHMARK_KINDS",
    "BenchmarkDist",
    "PointCloud",
    "checkerboard_membership",
    "make_rng",
    "moment",
    "norms",
    "read_cloud_csv",
    "sample_benchmark",
    "spawn_seeds",
    "subsample_cloud",
    "trim_cloud",
]

WEIGHT_TOLERANCE = 1e-12

BENCHMARK_KINDS = ("swissroll", "checkerboard", "pinwheel", "gaussian", "two-moons")

SeedLike = Union[int, np.random.SeedSequence]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """PCG64 generator; the same seed reproduces the same stream bit-for-bit."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    if seed is None or int(seed) < 0 or int(seed) >= 2 ** 64:
        raise ConfigurationError(f"Seed must be a 64-bit unsigned integer, got {seed!r}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def spawn_seeds(seed: SeedLike, count: int) -> List[np.random.SeedSequence]:
    """Independent child seeds; accepts an integer or an existing SeedSequence."""
    parent = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    return parent.spawn(count)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Weighted empirical measure on R^d.

    Arrays are copied and made read-only on construction, so clouds can be
    shared freely between threads.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[0] == 0 or points.shape[1] == 0:
            raise DomainError("A point cloud needs at least one point of positive dimension")
        if weights.shape != (points.shape[0],):
            raise DomainError(
                f"Weights length {weights.size} does not match the number of points {points.shape[0]}"
            )
        if not np.all(np.isfinite(points)):
            raise DomainError("Point coordinates must be finite")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DomainError("Weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
            raise DomainError(f"Weights sum to {weights.sum():.15g}, expected 1")
        points.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, points) -> "PointCloud":
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = points.shape[0]
        if n == 0:
            raise DomainError("A point cloud needs at least one point")
        return cls(points, np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, points, weights) -> "PointCloud":
        """Build a cloud from unnormalised nonnegative weights."""
        weights = np.asarray(weights, dtype=np.float64)
        total = weights.sum()
        if not np.isfinite(total) or total <= 0:
            raise DomainError("Weights must have a positive finite sum")
        return cls(np.atleast_2d(np.asarray(points, dtype=np.float64)), weights / total)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.weights == self.weights[0]))

    def scaled(self, factor: float) -> "PointCloud":
        return PointCloud(self.points * factor, self.weights)

    def equals(self, other: "PointCloud") -> bool:
        """Bitwise equality of points and weights."""
        return (
            self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.points, columns=[f"x{i + 1}" for i in range(self.dim)])
        frame["weight"] = self.weights
        return frame

    def to_csv(self, path: Union[str, Path]) -> Path:
        """One row per point: x1,...,xd,weight."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path


def read_cloud_csv(path: Union[str, Path]) -> PointCloud:
    frame = pd.read_csv(path)
    if "weight" not in frame.columns:
        raise ConfigurationError(f"{path}: missing 'weight' column")
    coords = [c for c in frame.columns if c != "weight"]
    return PointCloud.from_weights(frame[coords].to_numpy(dtype=np.float64), frame["weight"].to_numpy())


# ----------------------------------------------------------------------------
# Benchmark distributions
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkDist:
    """Named 2D benchmark distribution.

    ``scale`` multiplies every sample; ``noise`` overrides the sampler's
    default noise level where the sampler has one.
    """

    kind: str
    scale: float = 1.0
    noise: Optional[float] = None

    def __post_init__(self):
        if self.kind not in BENCHMARK_KINDS:
            raise ConfigurationError(
                f"Unknown benchmark '{self.kind}'. Choose one of: {', '.join(BENCHMARK_KINDS)}"
            )
        if not self.scale > 0:
            raise ConfigurationError("Benchmark scale must be positive")
        if self.noise is not None and self.noise < 0:
            raise ConfigurationError("Benchmark noise must be nonnegative")


def _swissroll(rng: np.random.Generator, n: int, noise: Optional[float]) -> np.ndarray:
    # t in [1.5 pi, 4.5 pi]; (t cos t, t sin t) / 5 plus isotropic Gaussian noise
    noise = config.SWISSROLL_NOISE if noise is None else noise
    t = 1.5 * math.pi * (1.0 + 2.0 * rng.uniform(size=n))
    spiral = np.column_stack([t * np.cos(t), t * np.sin(t)]) / 5.0
    return spiral + noise * rng.standard_normal((n, 2))


_ON_SQUARES = np.array(
    [(ix, iy) for iy in range(-2, 2) for ix in range(-2, 2) if (ix + iy) % 2 == 0], dtype=np.float64
)


def _checkerboard(rng: np.random.Generator, n: int, noise: Optional[float]) -> np.ndarray:
    # Uniform on the 8 unit squares of [-2, 2]^2 with even (ix + iy)
    corners = _ON_SQUARES[rng.integers(0, len(_ON_SQUARES), size=n)]
    return corners + rng.uniform(size=(n, 2))


def checkerboard_membership(points: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Boolean mask of points lying on an 'on' square of the board."""
    pts = np.asarray(points, dtype=np.float64) / scale
    half = config.CHECKERBOARD_HALF_WIDTH
    inside = np.all((pts >= -half) & (pts <= half), axis=1)
    cells = np.floor(np.clip(pts, -half, half - 1e-12)).astype(int)
    return inside & ((cells[:, 0] + cells[:, 1]) % 2 == 0)


def _pinwheel(rng: np.random.Generator, n: int, noise: Optional[float]) -> np.ndarray:
    radial = config.PINWHEEL_RADIAL_STD if noise is None else noise
    rads = np.linspace(0.0, 2.0 * math.pi, config.PINWHEEL_BLADES, endpoint=False)
    features = rng.standard_normal((n, 2)) * np.array([radial, config.PINWHEEL_TANGENTIAL_STD])
    features[:, 0] += 1.0
    labels = rng.integers(0, config.PINWHEEL_BLADES, size=n)
    angles = rads[labels] + config.PINWHEEL_RATE * np.exp(features[:, 0])
    cos, sin = np.cos(angles), np.sin(angles)
    rotated = np.column_stack([
        cos * features[:, 0] - sin * features[:, 1],
        sin * features[:, 0] + cos * features[:, 1],
    ])
    return 2.0 * rotated


def _gaussian(rng: np.random.Generator, n: int, noise: Optional[float]) -> np.ndarray:
    return rng.standard_normal((n, 2))


def _two_moons(rng: np.random.Generator, n: int, noise: Optional[float]) -> np.ndarray:
    noise = config.TWO_MOONS_NOISE if noise is None else noise
    theta = math.pi * rng.uniform(size=n)
    lower = rng.uniform(size=n) < 0.5
    x = np.where(lower, 1.0 - np.cos(theta), np.cos(theta))
    y = np.where(lower, 0.5 - np.sin(theta), np.sin(theta))
    moons = np.column_stack([x - 0.5, y - 0.25])
    return moons + noise * rng.standard_normal((n, 2))


_SAMPLERS: Dict[str, Callable[[np.random.Generator, int, Optional[float]], np.ndarray]] = {
    "swissroll": _swissroll,
    "checkerboard": _checkerboard,
    "pinwheel": _pinwheel,
    "gaussian": _gaussian,
    "two-moons": _two_moons,
}


def sample_benchmark(dist: BenchmarkDist, n: int, seed: SeedLike) -> PointCloud:
    """Draw ``n`` uniformly weighted 2D points from a benchmark distribution."""
    if isinstance(dist, str):
        dist = BenchmarkDist(dist)
    if n < 1:
        raise DomainError(f"Sample size must be at least 1, got {n}")
    rng = make_rng(seed)
    return PointCloud.uniform(dist.scale * _SAMPLERS[dist.kind](rng, int(n), dist.noise))


# ----------------------------------------------------------------------------
# Moments and trimming
# ----------------------------------------------------------------------------

def norms(cloud: PointCloud) -> np.ndarray:
    return np.linalg.norm(cloud.points, axis=1)


def moment(cloud: PointCloud, q: float) -> float:
    """Weighted q-th moment root (sum_i w_i |u_i|^q)^(1/q)."""
    if cloud is None or cloud.size == 0:
        raise DomainError("Moment of an empty cloud is undefined")
    if not q >= 1:
        raise DomainError(f"Moment order must be at least 1, got {q}")
    r = norms(cloud)
    scale = r.max()
    if scale == 0.0:
        return 0.0
    # factor out the largest norm so large q does not overflow
    return float(scale * np.sum(cloud.weights * (r / scale) ** q) ** (1.0 / q))


def trim_cloud(cloud: PointCloud, r: float) -> PointCloud:
    """Restrict to the closed ball of radius ``r`` and renormalise."""
    if not r > 0:
        raise DomainError(f"Trim radius must be positive, got {r}")
    keep = norms(cloud) <= r
    if keep.all():
        return cloud
    if not keep.any() or cloud.weights[keep].sum() <= 0:
        raise DomainError(f"Trim radius {r} is too small: no mass inside the ball")
    return PointCloud.from_weights(cloud.points[keep], cloud.weights[keep])


def subsample_cloud(cloud: PointCloud, n: int, seed: SeedLike) -> PointCloud:
    """Keep ``n`` atoms drawn without replacement, weights renormalised."""
    if n >= cloud.size:
        return cloud
    idx = np.sort(make_rng(seed).choice(cloud.size, size=n, replace=False))
    return PointCloud.from_weights(cloud.points[idx], cloud.weights[idx])
