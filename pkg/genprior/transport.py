"""Residual transport maps and the minimum-Wasserstein training loop.

A :class:`ResidualMapStack` is ``T = S_K o ... o S_1 o L`` where ``L`` is an
optional affine lift from the latent space and each stage is
``S_k(x) = x + G_k(x)`` with ``G_k`` a small MLP using leaky ReLU hidden
activations. Stages are trained greedily: stage k sees the reference cloud
pushed through the frozen stages before it and minimises the Sinkhorn
divergence between its output and the target minibatch.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from . import config
from .errors import ConfigurationError, DomainError, NumericalError, TrainingError
from .measures import PointCloud, make_rng
from .ot import OtConfig, exact_wp, sinkhorn_divergence

logger = logging.getLogger(__name__)

__all__ = [
    "LinearLift",
    "MlpBlock",
    "ResidualMapStack",
    "TrainConfig",
    "check_map_stability",
    "forward",
    "load_map",
    "map_l2_distance",
    "pushforward_cloud",
    "save_map",
    "train",
]

MAP_MAGIC = b"GPRM"
MAP_VERSION = 1
OPTIMIZERS = ("sgd", "momentum", "adam")


def leaky_relu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, config.LEAKY_SLOPE * x)


def leaky_relu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, config.LEAKY_SLOPE)


# ----------------------------------------------------------------------------
# Building blocks
# ----------------------------------------------------------------------------

@dataclass(eq=False)
class MlpBlock:
    """Fully connected network d -> h_1 -> ... -> d, leaky ReLU between layers."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]

    @classmethod
    def initialise(cls, dim: int, hidden: Sequence[int], rng: np.random.Generator,
                   zero_output: bool = True) -> "MlpBlock":
        widths = [dim, *hidden, dim]
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            weights.append(rng.standard_normal((fan_out, fan_in)) * math.sqrt(2.0 / fan_in))
            biases.append(np.zeros(fan_out))
        if zero_output:
            weights[-1][:] = 0.0
        return cls(weights, biases)

    @property
    def widths(self) -> List[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def parameters(self) -> List[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def forward(self, x: np.ndarray):
        activations, pre = [x], []
        a = x
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            pre.append(z)
            a = z if layer == last else leaky_relu(z)
            activations.append(a)
        return a, (activations, pre)

    def backward(self, cache, grad_out: np.ndarray):
        activations, pre = cache
        grads: List[np.ndarray] = []
        delta = grad_out
        for layer in range(len(self.weights) - 1, -1, -1):
            grads.append(delta.sum(axis=0))
            grads.append(delta.T @ activations[layer])
            grad_in = delta @ self.weights[layer]
            if layer > 0:
                delta = grad_in * leaky_relu_grad(pre[layer - 1])
        grads.reverse()  # -> W1, b1, W2, b2, ...
        return grad_in, grads


class _Residual:
    """x -> x + G(x) wrapper giving a stage the forward/backward interface."""

    def __init__(self, block: MlpBlock):
        self.block = block

    def parameters(self):
        return self.block.parameters()

    def forward(self, x):
        g, cache = self.block.forward(x)
        return x + g, cache

    def backward(self, cache, grad_out):
        grad_in, grads = self.block.backward(cache, grad_out)
        return grad_out + grad_in, grads


@dataclass(eq=False)
class LinearLift:
    """Affine map z -> W z + b from the latent space to the output space."""

    weight: np.ndarray
    bias: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "LinearLift":
        return cls(np.eye(dim), np.zeros(dim))

    @classmethod
    def from_pca(cls, data: np.ndarray, latent_dim: int) -> "LinearLift":
        """Mean plus the top principal directions scaled by their standard deviations."""
        mean = data.mean(axis=0)
        _, s, vt = np.linalg.svd(data - mean, full_matrices=False)
        k = min(latent_dim, vt.shape[0])
        std = s[:k] / math.sqrt(max(data.shape[0] - 1, 1))
        weight = np.zeros((data.shape[1], latent_dim))
        weight[:, :k] = vt[:k].T * std
        return cls(weight, mean.copy())

    def parameters(self) -> List[np.ndarray]:
        return [self.weight, self.bias]

    def forward(self, z):
        return z @ self.weight.T + self.bias, z

    def backward(self, z, grad_out):
        return grad_out @ self.weight, [grad_out.T @ z, grad_out.sum(axis=0)]


@dataclass(eq=False)
class ResidualMapStack:
    latent_dim: int
    output_dim: int
    lift: Optional[LinearLift] = None
    stages: List[MlpBlock] = field(default_factory=list)

    def __post_init__(self):
        if self.latent_dim < 1 or self.output_dim < 1:
            raise DomainError("Map dimensions must be positive")
        if self.lift is None and self.latent_dim != self.output_dim:
            raise DomainError("A linear lift is required when latent_dim != output_dim")
        if self.lift is not None and self.lift.weight.shape != (self.output_dim, self.latent_dim):
            raise DomainError(f"Lift shape {self.lift.weight.shape} does not match the map dimensions")
        for stage in self.stages:
            if stage.widths[0] != self.output_dim or stage.widths[-1] != self.output_dim:
                raise DomainError(f"Stage widths {stage.widths} do not map R^{self.output_dim} to itself")

    @classmethod
    def initialise(cls, latent_dim: int, output_dim: int, stage_count: int, hidden: Sequence[int],
                   seed, zero_output: bool = True, lift: Optional[LinearLift] = None) -> "ResidualMapStack":
        rng = make_rng(seed)
        if lift is None and latent_dim != output_dim:
            lift = LinearLift(rng.standard_normal((output_dim, latent_dim)) / math.sqrt(latent_dim),
                              np.zeros(output_dim))
        stages = [MlpBlock.initialise(output_dim, hidden, rng, zero_output) for _ in range(stage_count)]
        return cls(latent_dim, output_dim, lift, stages)

    @classmethod
    def affine(cls, matrix, offset) -> "ResidualMapStack":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        lift = LinearLift(matrix.copy(), np.asarray(offset, dtype=np.float64).copy())
        return cls(matrix.shape[1], matrix.shape[0], lift, [])

    def modules(self):
        mods = [] if self.lift is None else [self.lift]
        return mods + [_Residual(stage) for stage in self.stages]

    def parameters(self) -> List[np.ndarray]:
        return [p for module in self.modules() for p in module.parameters()]

    def flat_parameters(self) -> np.ndarray:
        params = self.parameters()
        return np.concatenate([p.ravel() for p in params]) if params else np.zeros(0)

    def set_flat_parameters(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        params = self.parameters()
        if values.size != sum(p.size for p in params):
            raise DomainError("Parameter vector length does not match the map")
        offset = 0
        for p in params:
            p[...] = values[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def copy(self) -> "ResidualMapStack":
        lift = None if self.lift is None else LinearLift(self.lift.weight.copy(), self.lift.bias.copy())
        stages = [MlpBlock([w.copy() for w in s.weights], [b.copy() for b in s.biases]) for s in self.stages]
        return ResidualMapStack(self.latent_dim, self.output_dim, lift, stages)

    def push(self, z: np.ndarray) -> np.ndarray:
        """Evaluate the map on a batch of latent points, shape (n, latent_dim)."""
        x = np.asarray(z, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.latent_dim:
            raise DomainError(f"Expected latent points of dimension {self.latent_dim}, got shape {x.shape}")
        for module in self.modules():
            x, _ = module.forward(x)
        return x


def forward(stack: ResidualMapStack, z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != stack.latent_dim:
        raise DomainError(f"Expected a latent vector of length {stack.latent_dim}, got shape {z.shape}")
    return stack.push(z[None, :])[0]


def pushforward_cloud(stack: ResidualMapStack, reference: PointCloud) -> PointCloud:
    if reference.dim != stack.latent_dim:
        raise DomainError(f"Reference dimension {reference.dim} != latent dimension {stack.latent_dim}")
    return PointCloud(stack.push(reference.points), reference.weights)


def map_l2_distance(map_a: ResidualMapStack, map_b: ResidualMapStack, reference: PointCloud) -> float:
    """Monte Carlo ||T_a - T_b|| in L2 of the reference measure."""
    if map_a.latent_dim != map_b.latent_dim or map_a.output_dim != map_b.output_dim:
        raise DomainError("Maps have incompatible dimensions")
    if reference.dim != map_a.latent_dim:
        raise DomainError("Reference dimension does not match the maps")
    diff = map_a.push(reference.points) - map_b.push(reference.points)
    return float(math.sqrt(np.sum(reference.weights * np.sum(diff ** 2, axis=1))))


def check_map_stability(map_a: ResidualMapStack, map_b: ResidualMapStack,
                        reference: PointCloud) -> Tuple[float, float, bool]:
    """W2 of the two pushforwards of a shared reference against the L2 map distance."""
    w2, _ = exact_wp(pushforward_cloud(map_a, reference), pushforward_cloud(map_b, reference), 2)
    l2 = map_l2_distance(map_a, map_b, reference)
    return w2, l2, w2 <= l2 + 1e-7


# ----------------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = config.DEFAULT_EPOCHS
    batch_size: int = config.DEFAULT_BATCH_SIZE
    learning_rate: float = config.DEFAULT_LEARNING_RATE
    stage_count: int = config.DEFAULT_STAGE_COUNT
    hidden_widths: Tuple[int, ...] = config.DEFAULT_HIDDEN_WIDTHS
    epsilon_schedule: Tuple[float, ...] = config.DEFAULT_EPSILON_SCHEDULE
    generator_update_period: int = config.DEFAULT_GENERATOR_UPDATE_PERIOD
    seed: int = 0
    optimizer: str = "sgd"
    momentum: float = 0.9
    affine_lift: bool = False
    joint_finetune_epochs: int = 0
    eval_size: int = 1024
    sinkhorn_tolerance: float = 1e-4
    sinkhorn_max_iters: int = 2000
    show_progress: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be at least 1")
        if self.batch_size < 2:
            raise ConfigurationError("batch_size must be at least 2")
        if not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.stage_count < 0:
            raise ConfigurationError("stage_count must be nonnegative")
        # recorded in manifests only; there is no critic to alternate with
        if self.generator_update_period < 1:
            raise ConfigurationError("generator_update_period must be at least 1")
        if not self.epsilon_schedule or any(not e > 0 for e in self.epsilon_schedule):
            raise ConfigurationError("epsilon_schedule must be a nonempty list of positive values")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigurationError(f"Unknown optimizer '{self.optimizer}'")

    def epsilon_at(self, epoch: int, epochs: Optional[int] = None) -> float:
        """Geometric interpolation through the schedule knots."""
        knots = np.log(np.asarray(self.epsilon_schedule, dtype=np.float64))
        total = self.epochs if epochs is None else epochs
        if len(knots) == 1 or total <= 1:
            return float(math.exp(knots[-1] if total <= 1 and len(knots) > 1 else knots[0]))
        position = epoch / (total - 1) * (len(knots) - 1)
        k = min(int(position), len(knots) - 2)
        frac = position - k
        return float(math.exp(knots[k] + frac * (knots[k + 1] - knots[k])))

    def ot_config(self, epsilon: float) -> OtConfig:
        return OtConfig.sinkhorn(epsilon, max_iters=self.sinkhorn_max_iters, tolerance=self.sinkhorn_tolerance)


class _Sgd:
    def __init__(self, params, cfg: TrainConfig):
        self.lr = cfg.learning_rate

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Momentum:
    def __init__(self, params, cfg: TrainConfig):
        self.lr, self.beta = cfg.learning_rate, cfg.momentum
        self.velocity = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.beta
            v += g
            p -= self.lr * v


class _Adam:
    def __init__(self, params, cfg: TrainConfig, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = cfg.learning_rate, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


_OPTIMIZER_IMPLS = {"sgd": _Sgd, "momentum": _Momentum, "adam": _Adam}


def _run_modules(modules, x):
    caches = []
    for module in modules:
        x, cache = module.forward(x)
        caches.append(cache)
    return x, caches


def surrogate_loss_and_grad(modules, x: np.ndarray, y: np.ndarray, ot_cfg: OtConfig):
    """Sinkhorn divergence between the pushed batch and the target batch, and parameter gradients."""
    out, caches = _run_modules(modules, x)
    if not np.all(np.isfinite(out)):
        return float("nan"), None
    loss, grad = sinkhorn_divergence(PointCloud.uniform(out), PointCloud.uniform(y), ot_cfg)
    # the divergence gradient is per point of a uniform cloud; chain through the modules
    grads: List[np.ndarray] = []
    for module, cache in zip(reversed(modules), reversed(caches)):
        grad, module_grads = module.backward(cache, grad)
        grads = module_grads + grads
    return loss, grads


def _divergence(modules, x, y, eps_cfg: OtConfig) -> float:
    out, _ = _run_modules(modules, x)
    if not np.all(np.isfinite(out)):
        return float("inf")
    value, _ = sinkhorn_divergence(PointCloud.uniform(out), PointCloud.uniform(y), eps_cfg)
    return value


def _fit(modules, frozen_input, target, cfg: TrainConfig, rng, epochs: int, label: str,
         history: List[float], stage_index: int):
    params = [p for m in modules for p in m.parameters()]
    optimizer = _OPTIMIZER_IMPLS[cfg.optimizer](params, cfg)
    n_x, n_y = frozen_input.shape[0], target.size
    uniform_target = target.is_uniform
    iterator = range(epochs)
    if cfg.show_progress:
        iterator = tqdm(iterator, desc=label, leave=False)
    for epoch in iterator:
        ot_cfg = cfg.ot_config(cfg.epsilon_at(epoch, epochs))
        xb = frozen_input[rng.integers(0, n_x, size=cfg.batch_size)]
        if uniform_target:
            yb = target.points[rng.integers(0, n_y, size=cfg.batch_size)]
        else:
            yb = target.points[rng.choice(n_y, size=cfg.batch_size, p=target.weights)]
        try:
            loss, grads = surrogate_loss_and_grad(modules, xb, yb, ot_cfg)
        except NumericalError as exc:
            raise TrainingError(f"{label}: Sinkhorn failed at epoch {epoch}: {exc}", epoch, stage_index) from exc
        if not math.isfinite(loss):
            raise TrainingError(f"{label}: non-finite loss at epoch {epoch}", epoch, stage_index)
        optimizer.step(params, grads)
        history.append(loss)


def train(target: PointCloud, reference: PointCloud, cfg: TrainConfig) -> Tuple[ResidualMapStack, List[float]]:
    """Greedy sequential training of a residual map pushing ``reference`` onto ``target``."""
    if target is None or reference is None:
        raise DomainError("Training needs nonempty target and reference clouds")
    rng = make_rng(cfg.seed)
    latent_dim, output_dim = reference.dim, target.dim
    history: List[float] = []

    eval_cfg = cfg.ot_config(cfg.epsilon_schedule[-1])
    n_eval = min(cfg.eval_size, reference.size, target.size)
    eval_x_idx = np.sort(rng.choice(reference.size, size=n_eval, replace=False))
    eval_y_idx = np.sort(rng.choice(target.size, size=n_eval, replace=False))
    eval_y = target.points[eval_y_idx]

    lift = None
    if latent_dim != output_dim:
        lift = LinearLift.from_pca(target.points, latent_dim)
    elif cfg.affine_lift:
        lift = LinearLift.identity(output_dim)
    stack = ResidualMapStack(latent_dim, output_dim, lift, [])

    x = reference.points.copy()
    if lift is not None:
        before = [p.copy() for p in lift.parameters()]
        base = _divergence([lift], x[eval_x_idx], eval_y, eval_cfg)
        _fit([lift], x, target, cfg, rng, cfg.epochs, "lift", history, 0)
        after = _divergence([lift], x[eval_x_idx], eval_y, eval_cfg)
        if not after <= base:
            logger.info("Lift stage did not improve (%.4g -> %.4g); keeping its initialisation", base, after)
            for p, old in zip(lift.parameters(), before):
                p[...] = old
        x, _ = lift.forward(x)

    for k in range(cfg.stage_count):
        block = MlpBlock.initialise(output_dim, cfg.hidden_widths, rng, zero_output=True)
        stage = _Residual(block)
        base = _divergence([], x[eval_x_idx], eval_y, eval_cfg)
        _fit([stage], x, target, cfg, rng, cfg.epochs, f"stage {k + 1}", history, k + 1)
        after = _divergence([stage], x[eval_x_idx], eval_y, eval_cfg)
        if not after <= base:
            # a zero output layer makes the stage the identity
            logger.info("Stage %d did not improve (%.4g -> %.4g); reset to identity", k + 1, base, after)
            block.weights[-1][:] = 0.0
            block.biases[-1][:] = 0.0
        else:
            logger.info("Stage %d: divergence %.4g -> %.4g", k + 1, base, after)
        stack.stages.append(block)
        x, _ = stage.forward(x)

    if cfg.joint_finetune_epochs > 0:
        snapshot = stack.copy()
        z = reference.points
        base = _divergence(stack.modules(), z[eval_x_idx], eval_y, eval_cfg)
        _fit(stack.modules(), z, target, cfg, rng, cfg.joint_finetune_epochs, "joint", history, -1)
        after = _divergence(stack.modules(), z[eval_x_idx], eval_y, eval_cfg)
        if not after <= base:
            stack.set_flat_parameters(snapshot.flat_parameters())

    if not history:
        history.append(_divergence(stack.modules(), reference.points[eval_x_idx], eval_y, eval_cfg))
    return stack, history


# ----------------------------------------------------------------------------
# Binary format
# ----------------------------------------------------------------------------

def save_map(stack: ResidualMapStack, path: Union[str, Path]) -> Path:
    """Header (magic, version, dims, stage widths) then little-endian float64 parameters."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = struct.pack("<4sIIIII", MAP_MAGIC, MAP_VERSION, stack.latent_dim, stack.output_dim,
                         int(stack.lift is not None), len(stack.stages))
    for stage in stack.stages:
        widths = stage.widths
        header += struct.pack(f"<I{len(widths)}I", len(widths), *widths)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(stack.flat_parameters().astype("<f8").tobytes())
    return path


def load_map(path: Union[str, Path]) -> ResidualMapStack:
    data = Path(path).read_bytes()
    head = struct.calcsize("<4sIIIII")
    if len(data) < head:
        raise ConfigurationError(f"{path}: truncated map file")
    magic, version, latent_dim, output_dim, has_lift, stage_count = struct.unpack_from("<4sIIIII", data)
    if magic != MAP_MAGIC:
        raise ConfigurationError(f"{path}: not a transport map file")
    if version != MAP_VERSION:
        raise ConfigurationError(f"{path}: unsupported map version {version}")
    offset = head
    stages = []
    for _ in range(stage_count):
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        widths = struct.unpack_from(f"<{count}I", data, offset)
        offset += 4 * count
        stages.append(MlpBlock(
            [np.zeros((o, i)) for i, o in zip(widths[:-1], widths[1:])],
            [np.zeros(o) for o in widths[1:]],
        ))
    lift = LinearLift(np.zeros((output_dim, latent_dim)), np.zeros(output_dim)) if has_lift else None
    stack = ResidualMapStack(latent_dim, output_dim, lift, stages)
    values = np.frombuffer(data, dtype="<f8", offset=offset)
    stack.set_flat_parameters(values.astype(np.float64))
    return stack
