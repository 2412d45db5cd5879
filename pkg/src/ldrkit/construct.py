"""Embedding an arbitrary vector as one column of a displacement-rank-1 matrix.

For a pair ``(A, B)`` with ``A^q = a I``, ``A = Q^-1 diag(lam) Q`` and
``T = (I - a B^q)^-1``, any ``M`` with ``Delta_{A,B}(M) = g h^T`` satisfies

    Q M e_j = D * (Q g),   D_i = h^T sum_k lam_i^k B^k T e_j.

So once ``(h, j)`` makes every ``D_i`` nonzero, ``g = Q^-1 ((Q v) / D)``
puts ``v`` in column ``j``. Every result is certified by reconstructing
the matrix and comparing the column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .displacement import DisplacementRep, reconstruct
from .errors import CertificateError, DimensionError, SelectorError
from .layer import LdrLayer, NetworkModel, network_forward
from .operators import OperatorPair, require_embeddable

NONSING_FLOOR = 1e-8
CANDIDATE_BUDGET = 64
CERT_TOL = 1e-8
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class Selector:
    h: np.ndarray
    j: int
    D: np.ndarray


@dataclass(frozen=True)
class ColumnEmbedding:
    rep: DisplacementRep
    j: int
    v: np.ndarray
    residual: float

    @property
    def g(self) -> np.ndarray:
        return self.rep.G[:, 0]

    @property
    def h(self) -> np.ndarray:
        return self.rep.H[:, 0]

    def matrix(self) -> np.ndarray:
        return reconstruct(self.rep)


def _column_powers(pair: OperatorPair, j: int) -> np.ndarray:
    """Columns ``B^k T e_j`` for ``k < q`` as an ``(n, q)`` array."""
    e = np.zeros(pair.n)
    e[j] = 1.0
    w = pair.apply_T(e)
    cols = [w]
    for _ in range(1, pair.q):
        w = pair.B.apply(w)
        cols.append(w)
    return np.stack(cols, axis=1)


def _eig_powers(pair: OperatorPair) -> np.ndarray:
    lam = pair.A.eig.lam
    return lam[:, None] ** np.arange(pair.q)[None, :]


def selector_diagonal(pair: OperatorPair, h, j: int) -> np.ndarray:
    """Diagonal entries ``D_i`` for a fixed ``(h, j)``."""
    h = np.asarray(h, dtype=float)
    if h.shape != (pair.n,):
        raise DimensionError(f"h must have length {pair.n}")
    s = h @ _column_powers(pair, j)
    return _eig_powers(pair) @ s


def find_selector(
    pair: OperatorPair,
    seed: int = 0,
    budget: int = CANDIDATE_BUDGET,
    floor: float = NONSING_FLOOR,
) -> Selector:
    """Search seeded random unit ``h`` for every ``j``; keep the ``(h, j)``
    with the largest ``min_i |D_i|`` (first one on ties)."""
    require_embeddable(pair)
    n = pair.n
    rng = np.random.default_rng(seed)
    Lk = _eig_powers(pair)
    best = (-1.0, None, None, None)
    for j in range(n):
        cands = rng.standard_normal((budget, n))
        cands /= np.linalg.norm(cands, axis=1, keepdims=True)
        D = (cands @ _column_powers(pair, j)) @ Lk.T
        score = np.abs(D).min(axis=1)
        i = int(np.argmax(score))
        if score[i] > best[0]:
            best = (float(score[i]), cands[i], j, D[i])
    score, h, j, D = best
    if h is None or score == 0.0 or score < floor * np.abs(D).max():
        raise SelectorError(max(score, 0.0))
    return Selector(h, j, D)


def solve_generator(pair: OperatorPair, h, j: int, v, floor: float = NONSING_FLOOR) -> np.ndarray:
    """``g`` such that column ``j`` of the matrix generated by ``(g, h)`` is ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (pair.n,):
        raise DimensionError(f"target vector must have length {pair.n}, got {v.shape}")
    D = selector_diagonal(pair, h, j)
    mags = np.abs(D)
    if mags.min() == 0.0 or mags.min() < floor * mags.max():
        raise SelectorError(float(mags.min()))
    ed = pair.A.eig
    g = ed.Q_inv @ ((ed.Q @ v) / D)
    scale = max(np.abs(g.real).max(), 1.0)
    if np.abs(g.imag).max() > IMAG_TOL * scale:
        raise CertificateError(
            f"generator has imaginary residue {np.abs(g.imag).max():.2e} for a real problem"
        )
    return g.real.copy()


def column_residual(M: np.ndarray, j: int, v: np.ndarray) -> float:
    denom = np.abs(v).max()
    return float(np.abs(M[:, j] - v).max() / (denom if denom > 0 else 1.0))


def construct_with_column(
    pair: OperatorPair, v, seed: int = 0, selector: Selector | None = None
) -> ColumnEmbedding:
    """Certified rank-1-displacement matrix whose column ``j`` equals ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (pair.n,):
        raise DimensionError(f"target vector must have length {pair.n}, got {v.shape}")
    sel = find_selector(pair, seed) if selector is None else selector
    g = solve_generator(pair, sel.h, sel.j, v)
    rep = DisplacementRep(pair, g, sel.h)
    res = column_residual(reconstruct(rep), sel.j, v)
    if not res <= CERT_TOL:
        raise CertificateError(f"column {sel.j} residual {res:.3e} exceeds {CERT_TOL:.0e}")
    return ColumnEmbedding(rep, sel.j, v.copy(), res)


@dataclass(frozen=True)
class OneHotNetwork:
    """Single-layer network reading out only the embedded column's unit."""

    embedding: ColumnEmbedding
    alpha: np.ndarray
    theta: float
    model: NetworkModel

    def __call__(self, x) -> np.ndarray:
        return network_forward(self.model, x)


def embed_as_network(
    pair: OperatorPair, v, theta: float, sigma: str = "sigmoid", seed: int = 0
) -> OneHotNetwork:
    """Network ``x -> sum_i alpha_i sigma(w_i^T x + theta)`` equal to
    ``sigma(v^T x + theta)``, with ``alpha`` one-hot at the embedded column."""
    emb = construct_with_column(pair, v, seed)
    n = pair.n
    layer = LdrLayer(
        pair,
        emb.rep.G[None, :, :],
        emb.rep.H[None, :, :],
        np.full(n, float(theta)),
        sigma,
    )
    alpha = np.zeros(n)
    alpha[emb.j] = 1.0
    model = NetworkModel([layer], alpha, 0.0)
    return OneHotNetwork(emb, alpha, float(theta), model)
