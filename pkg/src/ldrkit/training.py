"""Toy regression targets, SGD training, and the error-versus-k experiment."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ModelFileError, TrainingError
from .layer import NetworkModel, init_layer, network_backward, network_forward
from .operators import make_pair

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
TARGET_KINDS = ("planted_ldr", "smooth_radial", "sinusoid", "constant")


@dataclass
class OptimizerConfig:
    lr: float = 0.05
    epochs: int = 2000
    batch: int = 32
    restarts: int = 5
    keep_best: bool = True


@dataclass
class ExperimentConfig:
    target: dict = field(default_factory=lambda: {"kind": "smooth_radial"})
    domain_radius: float = 1.0
    input_dim: int = 8
    k: int = 2
    k_grid: list = field(default_factory=lambda: [1, 2, 4, 8, 16])
    rank: int = 1
    operators: Any = "column"
    activation: str = "sigmoid"
    train_samples: int = 512
    eval_samples: int = 4096
    seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    monotone_tol: float = 0.05
    planted_tol: float = 1e-4
    standardize: bool = True
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if isinstance(self.optimizer, dict):
            self.optimizer = OptimizerConfig(**self.optimizer)
        self.validate()

    def validate(self) -> None:
        kind = self.target.get("kind") if isinstance(self.target, dict) else None
        if kind not in TARGET_KINDS:
            raise ValueError(f"target.kind must be one of {TARGET_KINDS}, got {kind!r}")
        if self.version != CONFIG_VERSION:
            raise ModelFileError(f"config version {self.version} unsupported (expected {CONFIG_VERSION})")
        if self.domain_radius <= 0:
            raise ValueError("domain_radius must be positive")
        if self.input_dim < 1 or self.k < 1 or self.rank < 1:
            raise ValueError("input_dim, k and rank must be positive")
        grid = list(self.k_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValueError("k_grid must be nonempty, positive and strictly increasing")
        o = self.optimizer
        if o.lr <= 0 or o.epochs < 1 or o.batch < 1 or o.restarts < 1:
            raise ValueError("optimizer settings must be positive")
        if self.monotone_tol <= 0 or self.planted_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.train_samples < 1 or self.eval_samples < 1:
            raise ValueError("sample counts must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def sample_ball(m: int, n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``m`` points uniform on the ``n``-ball of the given radius."""
    d = rng.standard_normal((m, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    rad = radius * rng.random(m) ** (1.0 / n)
    return d * rad[:, None]


def planted_model(cfg: ExperimentConfig, k: int | None = None, seed: int | None = None) -> NetworkModel:
    tgt = cfg.target
    k = int(tgt.get("k", cfg.k)) if k is None else k
    seed = int(tgt.get("seed", 0)) if seed is None else seed
    n = cfg.input_dim
    rng = np.random.default_rng([seed, 7919])
    pair = make_pair(cfg.operators, n)
    layer = init_layer(n, k, cfg.rank, pair, rng, cfg.activation)
    alpha = rng.standard_normal(k * n) / np.sqrt(k * n)
    return NetworkModel([layer], alpha, 0.1 * rng.standard_normal())


def make_target(cfg: ExperimentConfig) -> Callable[[np.ndarray], np.ndarray]:
    tgt = cfg.target
    kind = tgt["kind"]
    r = cfg.domain_radius
    if kind == "smooth_radial":
        return lambda X: np.exp(-np.sum(X**2, axis=1) / r**2)
    if kind == "sinusoid":
        freq = float(tgt.get("frequency", 1.0))
        u = np.ones(cfg.input_dim) / np.sqrt(cfg.input_dim)
        return lambda X: np.sin(freq * np.pi * (X @ u) / r)
    if kind == "constant":
        c = float(tgt.get("value", 0.0))
        return lambda X: np.full(X.shape[0], c)
    model = planted_model(cfg)
    return lambda X: network_forward(model, X)


def init_model(cfg: ExperimentConfig, k: int, rng: np.random.Generator) -> NetworkModel:
    """Random hidden layer; zero readout so training starts from ``f = 0``."""
    n = cfg.input_dim
    pair = make_pair(cfg.operators, n)
    layer = init_layer(n, k, cfg.rank, pair, rng, cfg.activation)
    return NetworkModel([layer], np.zeros(k * n), 0.0)


def mse(model: NetworkModel, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((network_forward(model, X) - y) ** 2))


def sgd(
    model: NetworkModel,
    X: np.ndarray,
    y: np.ndarray,
    opt: OptimizerConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Minibatch SGD on the mean squared error; returns per-epoch train MSE.

    With ``opt.keep_best`` the model is left at the epoch with the lowest
    train MSE rather than the last one, which removes end-of-run SGD noise.
    """
    m = X.shape[0]
    history = []
    best_loss, best = np.inf, None
    for epoch in range(opt.epochs):
        perm = rng.permutation(m)
        for start in range(0, m, opt.batch):
            idx = perm[start:start + opt.batch]
            Xb = X[idx]
            out, caches, last = network_forward(model, Xb, return_caches=True)
            dout = 2.0 * (out - y[idx]) / idx.size
            grads = network_backward(model, Xb, dout, caches=(caches, last))
            model.sgd_step(grads, opt.lr)
        loss = mse(model, X, y)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite training loss at epoch {epoch}")
        history.append(loss)
        if opt.keep_best and loss < best_loss:
            best_loss, best = loss, model.copy()
    if best is not None:
        model.layers, model.alpha, model.out_bias = best.layers, best.alpha, best.out_bias
    return history


@dataclass
class FitResult:
    k: int
    model: NetworkModel
    train_mse: float
    eval_mse: float
    restart: int
    history: list
    restart_train_mse: list
    failed: bool = False


def target_scaling(y: np.ndarray, enabled: bool = True) -> tuple[float, float]:
    """``(shift, scale)`` that standardize ``y``; identity for constant targets."""
    if not enabled:
        return 0.0, 1.0
    shift = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 1e-12 * max(1.0, abs(shift)):
        return shift, 1.0
    return shift, scale


def unscale_model(model: NetworkModel, shift: float, scale: float) -> None:
    """Fold a target standardization back into the readout, in place."""
    model.alpha *= scale
    model.out_bias = model.out_bias * scale + shift


def fit_best_of_restarts(
    cfg: ExperimentConfig,
    k: int,
    X: np.ndarray,
    y: np.ndarray,
    X_eval: np.ndarray,
    y_eval: np.ndarray,
) -> FitResult:
    """Train ``restarts`` independently seeded models; keep the lowest train MSE.

    With ``cfg.standardize`` the optimizer sees ``(y - mean) / std``; the
    returned model and all reported errors are in the original units.
    """
    best = None
    train_losses = []
    shift, scale = target_scaling(y, cfg.standardize)
    y_fit = (y - shift) / scale
    for restart in range(cfg.optimizer.restarts):
        rng = np.random.default_rng([cfg.seed, k, restart])
        model = init_model(cfg, k, rng)
        try:
            hist = sgd(model, X, y_fit, cfg.optimizer, rng)
        except TrainingError as exc:
            log.warning("k=%d restart=%d diverged: %s", k, restart, exc)
            train_losses.append(float("nan"))
            continue
        unscale_model(model, shift, scale)
        hist = [h * scale**2 for h in hist]
        loss = mse(model, X, y)
        train_losses.append(loss)
        if best is None or loss < best[0]:
            best = (loss, model, restart, hist)
        log.info("k=%d restart=%d train_mse=%.3e", k, restart, loss)
    if best is None:
        return FitResult(k, None, float("nan"), float("nan"), -1, [], train_losses, failed=True)
    loss, model, restart, hist = best
    return FitResult(k, model, loss, mse(model, X_eval, y_eval), restart, hist, train_losses)


def make_data(cfg: ExperimentConfig):
    f = make_target(cfg)
    rng = np.random.default_rng([cfg.seed, 104729])
    X = sample_ball(cfg.train_samples, cfg.input_dim, cfg.domain_radius, rng)
    X_eval = sample_ball(cfg.eval_samples, cfg.input_dim, cfg.domain_radius, rng)
    return X, f(X), X_eval, f(X_eval)


def train(cfg: ExperimentConfig, k: int | None = None) -> FitResult:
    X, y, X_eval, y_eval = make_data(cfg)
    return fit_best_of_restarts(cfg, cfg.k if k is None else k, X, y, X_eval, y_eval)


@dataclass
class DecayRow:
    k: int
    eval_mse: float
    train_mse: float
    bound: float
    failed: bool


@dataclass
class DecayReport:
    rows: list[DecayRow]
    surrogate_C: float
    slope: float
    radius: float

    def errors(self) -> list[float]:
        return [r.eval_mse for r in self.rows]


def surrogate_C(X: np.ndarray, fx: np.ndarray) -> float:
    """Monte-Carlo mean of ``|x| |f(x)|`` under the sampling measure."""
    return float(np.mean(np.linalg.norm(X, axis=1) * np.abs(fx)))


def loglog_slope(ks, errs) -> float:
    ks = np.asarray(ks, dtype=float)
    errs = np.asarray(errs, dtype=float)
    ok = np.isfinite(errs) & (errs > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ks[ok]), np.log(errs[ok]), 1)[0])


def decay(cfg: ExperimentConfig) -> DecayReport:
    if len(cfg.k_grid) < 3:
        raise ValueError("decay needs at least three k values")
    X, y, X_eval, y_eval = make_data(cfg)
    C = surrogate_C(X_eval, y_eval)
    r = cfg.domain_radius
    rows = []
    for k in cfg.k_grid:
        fit = fit_best_of_restarts(cfg, k, X, y, X_eval, y_eval)
        rows.append(DecayRow(k, fit.eval_mse, fit.train_mse, 4 * r**2 * C / k, fit.failed))
    slope = loglog_slope([row.k for row in rows], [row.eval_mse for row in rows])
    return DecayReport(rows, C, slope, r)


def is_monotone(errors, tol: float) -> bool:
    """Nonincreasing up to a relative uptick of ``tol`` between neighbours."""
    return all(b <= (1.0 + tol) * a for a, b in zip(errors, errors[1:]))
