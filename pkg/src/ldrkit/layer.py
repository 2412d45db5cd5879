"""LDR fully-connected layers, single-readout networks, and their gradients.

A layer maps ``x`` (length ``n``) to ``y = sigma(W^T x + theta)`` (length
``k n``) where ``W = [W_1 | ... | W_k]`` and every ``n x n`` block ``W_i`` is
stored only through its generators ``(G_i, H_i)`` and operator pair.

Inputs may be a single vector of shape ``(n,)`` or a batch ``(m, n)``.
Batched backward sums parameter gradients over the batch and returns the
input gradient per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .displacement import (
    DisplacementRep,
    PowerKernel,
    block_backward,
    block_rmatvec,
    power_kernel,
    reconstruct,
)
from .errors import DimensionError, StaleCacheError
from .operators import OperatorPair

ACTIVATIONS = ("sigmoid", "relu", "identity", "binary_step")


def activate(name: str, a: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * a))
    if name == "relu":
        return np.maximum(a, 0.0)
    if name == "identity":
        return a
    if name == "binary_step":
        return (a >= 0.0).astype(float)
    raise ValueError(f"unknown activation {name!r}")


def activation_grad(name: str, a: np.ndarray) -> np.ndarray:
    if name == "sigmoid":
        s = 0.5 * (1.0 + np.tanh(0.5 * a))
        return s * (1.0 - s)
    if name == "relu":
        return (a > 0.0).astype(float)
    if name == "identity":
        return np.ones_like(a)
    if name == "binary_step":
        return np.zeros_like(a)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class LayerCache:
    X: np.ndarray  # (n, m)
    a: np.ndarray  # (kn, m)
    batched: bool
    layer_id: int
    version: int


@dataclass
class LayerGradients:
    dG: np.ndarray  # (k, n, r)
    dH: np.ndarray  # (k, n, r)
    dtheta: np.ndarray  # (kn,)
    dx: np.ndarray  # (n,) or (m, n)


class LdrLayer:
    """``k`` square LDR blocks with bias ``theta`` and activation ``sigma``.

    ``pairs`` is either one :class:`OperatorPair` shared by every block or a
    list with one pair per block. ``G`` and ``H`` have shape ``(k, n, r)``.
    ``kernel`` picks how blocks are applied: ``"recursive"`` applies the
    operators to the generators directly and never forms ``W``; ``"power"``
    rebuilds dense blocks from precomputed operator powers once per parameter
    update, which is much faster for small ``n``; ``"auto"`` uses ``"power"``
    when the power tables fit in memory.
    """

    def __init__(self, pairs, G, H, theta, sigma: str = "sigmoid", kernel: str = "auto"):
        G = np.array(G, dtype=float)
        H = np.array(H, dtype=float)
        if G.ndim != 3 or G.shape != H.shape:
            raise DimensionError(f"G and H must share a (k, n, r) shape; got {G.shape}, {H.shape}")
        k, n, r = G.shape
        if isinstance(pairs, OperatorPair):
            pairs = [pairs] * k
        pairs = list(pairs)
        if len(pairs) != k:
            raise DimensionError(f"{len(pairs)} operator pairs for {k} blocks")
        for p in pairs:
            if p.n != n:
                raise DimensionError(f"operator pair of size {p.n} for blocks of size {n}")
        theta = np.array(theta, dtype=float).ravel()
        if theta.shape != (k * n,):
            raise DimensionError(f"theta must have length {k * n}, got {theta.size}")
        if sigma not in ACTIVATIONS:
            raise ValueError(f"unknown activation {sigma!r}")
        self.pairs = pairs
        self.G = G
        self.H = H
        self.theta = theta
        self.sigma = sigma
        self.version = 0
        self._W = None
        if kernel not in ("auto", "recursive", "power"):
            raise ValueError(f"unknown kernel {kernel!r}")
        self.kernel = kernel
        self._groups = _group_blocks(pairs)
        if kernel == "auto":
            self.uses_power = all(PowerKernel.suitable(p) for p, _ in self._groups)
        else:
            self.uses_power = kernel == "power"

    @classmethod
    def from_blocks(cls, blocks: list[DisplacementRep], theta, sigma: str = "sigmoid") -> "LdrLayer":
        G = np.stack([b.G for b in blocks])
        H = np.stack([b.H for b in blocks])
        return cls([b.pair for b in blocks], G, H, theta, sigma)

    @property
    def k(self) -> int:
        return self.G.shape[0]

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def r(self) -> int:
        return self.G.shape[2]

    @property
    def width(self) -> int:
        return self.k * self.n

    @property
    def blocks(self) -> list[DisplacementRep]:
        return [DisplacementRep(p, g, h) for p, g, h in zip(self.pairs, self.G, self.H)]

    def touch(self) -> None:
        """Mark parameters as modified: drops the dense cache, stales caches."""
        self.version += 1
        self._W = None

    def sgd_step(self, grads: LayerGradients, lr: float) -> None:
        self.G -= lr * grads.dG
        self.H -= lr * grads.dH
        self.theta -= lr * grads.dtheta
        self.touch()

    def copy(self) -> "LdrLayer":
        return LdrLayer(
            self.pairs, self.G.copy(), self.H.copy(), self.theta.copy(), self.sigma, self.kernel
        )

    def parameter_count(self) -> dict[str, int]:
        ops = sum(p.A.parameter_count() + p.B.parameter_count() for p in self.pairs)
        return {
            "generators": 2 * self.k * self.n * self.r,
            "biases": self.width,
            "operators": ops,
        }


def _group_blocks(pairs: list[OperatorPair]) -> list[tuple[OperatorPair, object]]:
    order: dict[int, list[int]] = {}
    for i, p in enumerate(pairs):
        order.setdefault(id(p), []).append(i)
    if len(order) == 1:
        return [(pairs[0], slice(None))]
    return [(pairs[idx[0]], np.array(idx)) for idx in order.values()]


def _as_columns(x: np.ndarray, n: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape != (n,):
            raise DimensionError(f"expected input of length {n}, got {x.shape[0]}")
        return x[:, None], False
    if x.ndim != 2 or x.shape[1] != n:
        raise DimensionError(f"expected input batch of shape (m, {n}), got {x.shape}")
    return x.T, True


def materialize(layer: LdrLayer) -> np.ndarray:
    """Dense ``W = [W_1 | ... | W_k]`` of shape ``(n, k n)``; cached."""
    if layer._W is None:
        if layer.uses_power:
            blocks = np.empty((layer.k, layer.n, layer.n))
            for pair, idx in layer._groups:
                blocks[idx] = power_kernel(pair).materialize(layer.G[idx], layer.H[idx])
            W = np.ascontiguousarray(blocks.transpose(1, 0, 2).reshape(layer.n, layer.width))
        else:
            W = np.hstack([reconstruct(b) for b in layer.blocks])
        W.setflags(write=False)
        layer._W = W
    return layer._W


def preactivation(layer: LdrLayer, X: np.ndarray, dense: bool = False) -> np.ndarray:
    """``W^T X + theta`` for column-stacked ``X`` of shape ``(n, m)``."""
    if dense or layer.uses_power:
        return materialize(layer).T @ X + layer.theta[:, None]
    k, n = layer.k, layer.n
    out = np.empty((k, n, X.shape[1]))
    for pair, idx in layer._groups:
        Gt = layer.G[idx].transpose(1, 0, 2)
        Ht = layer.H[idx].transpose(1, 0, 2)
        out[idx] = block_rmatvec(pair, Gt, Ht, X).transpose(1, 0, 2)
    return out.reshape(k * n, -1) + layer.theta[:, None]


def forward(layer: LdrLayer, x, dense: bool = False) -> tuple[np.ndarray, LayerCache]:
    """``y = sigma(W^T x + theta)`` and the cache needed by :func:`backward`.

    The recursive kernel never forms ``W``; ``dense=True`` (or the power
    kernel) multiplies by the cached materialized matrix instead.
    """
    X, batched = _as_columns(x, layer.n)
    a = preactivation(layer, X, dense)
    y = activate(layer.sigma, a)
    cache = LayerCache(X, a, batched, id(layer), layer.version)
    return (y.T if batched else y[:, 0]), cache


def backward(layer: LdrLayer, cache: LayerCache, upstream) -> LayerGradients:
    """Gradients of an objective ``O`` given ``dO/dy``."""
    if cache.layer_id != id(layer) or cache.version != layer.version:
        raise StaleCacheError("cache does not belong to the current layer parameters")
    U = np.asarray(upstream, dtype=float)
    U = U.T if cache.batched else U[:, None]
    if U.shape != cache.a.shape:
        raise DimensionError(f"upstream shape {U.shape} does not match layer output {cache.a.shape}")
    delta = U * activation_grad(layer.sigma, cache.a)
    k, n = layer.k, layer.n
    m = delta.shape[1]
    dG = np.empty_like(layer.G)
    dH = np.empty_like(layer.H)
    if layer.uses_power:
        # dO/dW = X delta^T, split into (k, n, n) blocks
        dW = (cache.X @ delta.T).reshape(n, k, n).transpose(1, 0, 2)
        for pair, idx in layer._groups:
            dG[idx], dH[idx] = power_kernel(pair).generator_grads(layer.G[idx], layer.H[idx], dW[idx])
        dX = materialize(layer) @ delta
        return LayerGradients(dG, dH, delta.sum(axis=1), dX.T if cache.batched else dX[:, 0])
    Y = delta.reshape(k, n, m)
    dX = np.zeros((n, m))
    for pair, idx in layer._groups:
        Gt = layer.G[idx].transpose(1, 0, 2)
        Ht = layer.H[idx].transpose(1, 0, 2)
        Yt = Y[idx].transpose(1, 0, 2)
        g, h, wy = block_backward(pair, Gt, Ht, cache.X, Yt)
        dG[idx] = g.transpose(1, 0, 2)
        dH[idx] = h.transpose(1, 0, 2)
        dX += wy
    return LayerGradients(dG, dH, delta.sum(axis=1), dX.T if cache.batched else dX[:, 0])


# -- networks -----------------------------------------------------------------


@dataclass
class ModelGradients:
    layers: list[LayerGradients]
    dalpha: np.ndarray
    dbias: float
    dx: np.ndarray


@dataclass
class NetworkModel:
    """Stacked LDR layers followed by the readout ``alpha . y + out_bias``."""

    layers: list[LdrLayer]
    alpha: np.ndarray
    out_bias: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers:
            raise DimensionError("a network needs at least one layer")
        self.alpha = np.array(self.alpha, dtype=float).ravel()
        self.out_bias = float(self.out_bias)
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.n != prev.width:
                raise DimensionError(
                    f"layer of input size {nxt.n} follows a layer of width {prev.width}"
                )
        if self.alpha.size != self.layers[-1].width:
            raise DimensionError(
                f"alpha has length {self.alpha.size}, final layer width is {self.layers[-1].width}"
            )

    @property
    def input_dim(self) -> int:
        return self.layers[0].n

    def copy(self) -> "NetworkModel":
        return NetworkModel([l.copy() for l in self.layers], self.alpha.copy(), self.out_bias, dict(self.meta))

    def sgd_step(self, grads: ModelGradients, lr: float) -> None:
        for layer, g in zip(self.layers, grads.layers):
            layer.sgd_step(g, lr)
        self.alpha -= lr * grads.dalpha
        self.out_bias -= lr * grads.dbias

    def parameter_count(self) -> int:
        total = self.alpha.size + 1
        for layer in self.layers:
            c = layer.parameter_count()
            total += c["generators"] + c["biases"]
        return total


def network_forward(model: NetworkModel, x, return_caches: bool = False, dense: bool = False):
    """Scalar output (or one per batch row) of the network."""
    caches = []
    h = x
    for layer in model.layers:
        h, cache = forward(layer, h, dense=dense)
        caches.append(cache)
    out = h @ model.alpha + model.out_bias
    if return_caches:
        return out, caches, h
    return out


def network_backward(model: NetworkModel, x, dout, caches=None) -> ModelGradients:
    """All-parameter gradients given ``dO/d(output)``.

    ``caches`` may be passed as ``(caches, last_hidden)`` from a prior
    :func:`network_forward` call with ``return_caches=True``.
    """
    if caches is None:
        _, cache_list, last = network_forward(model, x, return_caches=True)
    else:
        cache_list, last = caches
    dout = np.asarray(dout, dtype=float)
    batched = cache_list[0].batched
    if batched:
        dalpha = last.T @ dout
        dbias = float(dout.sum())
        upstream = dout[:, None] * model.alpha[None, :]
    else:
        dalpha = float(dout) * last
        dbias = float(dout)
        upstream = float(dout) * model.alpha
    grads = []
    for layer, cache in zip(reversed(model.layers), reversed(cache_list)):
        g = backward(layer, cache, upstream)
        grads.append(g)
        upstream = g.dx
    grads.reverse()
    return ModelGradients(grads, dalpha, dbias, upstream)


def init_layer(
    n: int,
    k: int,
    r: int,
    pair: OperatorPair,
    rng: np.random.Generator,
    sigma: str = "sigmoid",
    weight_rms: float | None = None,
    bias_scale: float = 0.5,
) -> LdrLayer:
    """Random layer whose dense weights have entry RMS ``weight_rms``
    (default ``1/sqrt(n)``)."""
    G = rng.standard_normal((k, n, r))
    H = rng.standard_normal((k, n, r))
    theta = bias_scale * rng.standard_normal(k * n)
    layer = LdrLayer(pair, G, H, theta, sigma)
    target = 1.0 / np.sqrt(n) if weight_rms is None else weight_rms
    rms = np.sqrt(np.mean(materialize(layer) ** 2))
    if rms > 0:
        s = np.sqrt(target / rms)
        layer.G *= s
        layer.H *= s
        layer.touch()
    return layer
