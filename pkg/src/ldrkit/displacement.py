"""Stein/Sylvester displacement, numerical displacement rank, and the
generator round trip ``M -> (G, H) -> M``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, RankError
from .operators import OperatorPair

RANK_TOL = 1e-8


def _check_square(M: np.ndarray, n: int) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (n, n):
        raise DimensionError(f"expected a {n}x{n} matrix, got shape {M.shape}")
    return M


def stein_displacement(M, pair: OperatorPair) -> np.ndarray:
    """``M - A M B``."""
    M = _check_square(M, pair.n)
    return M - pair.B.apply_right(pair.A.apply(M))


def sylvester_displacement(M, pair: OperatorPair) -> np.ndarray:
    """``A M - M B``."""
    M = _check_square(M, pair.n)
    return pair.A.apply(M) - pair.B.apply_right(M)


_FORMS = {"stein": stein_displacement, "sylvester": sylvester_displacement}


def displacement(M, pair: OperatorPair, form: str = "stein") -> np.ndarray:
    try:
        return _FORMS[form](M, pair)
    except KeyError:
        raise ValueError(f"unknown displacement form {form!r}") from None


def numerical_rank(X: np.ndarray, tol: float = RANK_TOL) -> int:
    """Singular values above ``tol * sigma_max``; 0 for the zero matrix."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = np.linalg.svd(X, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def displacement_rank(M, pair: OperatorPair, tol: float = RANK_TOL, form: str = "stein") -> int:
    return numerical_rank(displacement(M, pair, form), tol)


@dataclass(frozen=True, eq=False)
class DisplacementRep:
    """Generators ``(G, H)`` with ``Delta_{A,B}(W) = G H^T``."""

    pair: OperatorPair
    G: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        H = np.asarray(self.H, dtype=float)
        if G.ndim == 1:
            G = G[:, None]
        if H.ndim == 1:
            H = H[:, None]
        n = self.pair.n
        if G.shape[0] != n or H.shape[0] != n or G.shape[1] != H.shape[1]:
            raise DimensionError(
                f"generators must both be {n} x r; got G {G.shape}, H {H.shape}"
            )
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.pair.n

    @property
    def r(self) -> int:
        return self.G.shape[1]

    def matvec(self, X: np.ndarray) -> np.ndarray:
        """``W @ X`` without forming ``W``."""
        X = np.asarray(X, dtype=float)
        X2 = X.reshape(self.n, -1)
        out = block_matvec(self.pair, self.G[:, None, :], self.H[:, None, :], X2[:, None, :])
        return out.reshape(X.shape)

    def rmatvec(self, X: np.ndarray) -> np.ndarray:
        """``W.T @ X`` without forming ``W``."""
        X = np.asarray(X, dtype=float)
        out = block_rmatvec(self.pair, self.G[:, None, :], self.H[:, None, :], X.reshape(self.n, -1))
        return out[:, 0].reshape(X.shape)


def compress(M, pair: OperatorPair, r: int, tol: float = RANK_TOL) -> DisplacementRep:
    """Width-``r`` generators of ``Delta_{A,B}(M)`` from a truncated SVD.

    Raises :class:`RankError` carrying the measured rank when it exceeds ``r``.
    """
    D = stein_displacement(M, pair)
    U, s, Vt = np.linalg.svd(D)
    rank = 0 if s[0] == 0.0 else int(np.count_nonzero(s > tol * s[0]))
    if rank > r:
        raise RankError(rank, r)
    root = np.sqrt(s[:r])
    G = U[:, :r] * root
    H = Vt[:r].T * root
    return DisplacementRep(pair, G, H)


def reconstruct(rep: DisplacementRep) -> np.ndarray:
    """``[sum_k A^k G H^T B^k] (I - a B^q)^-1``."""
    pair = rep.pair
    GA = rep.G
    HB = rep.H
    S = GA @ HB.T
    for _ in range(1, pair.q):
        GA = pair.A.apply(GA)
        HB = pair.B.apply(HB, transpose=True)
        S += GA @ HB.T
    return pair.apply_T(S.T, transpose=True).T


# Stacked kernels. Generators for k blocks sharing one pair are stored as
# (n, k, r) arrays; block-stacked vectors as (n, k, m). Operators act on axis 0.


def block_rmatvec(pair: OperatorPair, G: np.ndarray, H: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``W_i^T X`` for every block ``i``; ``X`` is ``(n, m)``, result ``(n, k, m)``."""
    A, B = pair.A, pair.B
    u = X
    ds = []
    for k in range(pair.q):
        if k:
            u = A.apply(u, transpose=True)
        ds.append(np.einsum("nkr,nm->krm", G, u))
    z = np.einsum("nkr,krm->nkm", H, ds[-1])
    for d in reversed(ds[:-1]):
        z = B.apply(z, transpose=True) + np.einsum("nkr,krm->nkm", H, d)
    return pair.apply_T(z, transpose=True)


def block_matvec(pair: OperatorPair, G: np.ndarray, H: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``sum_i W_i Y_i``; ``Y`` is ``(n, k, m)``, result ``(n, m)``."""
    A, B = pair.A, pair.B
    p = pair.apply_T(Y)
    cs = []
    for k in range(pair.q):
        if k:
            p = B.apply(p)
        cs.append(np.einsum("nkr,nkm->krm", H, p))
    z = np.einsum("nkr,krm->nm", G, cs[-1])
    for c in reversed(cs[:-1]):
        z = A.apply(z) + np.einsum("nkr,krm->nm", G, c)
    return z


def block_backward(
    pair: OperatorPair, G: np.ndarray, H: np.ndarray, X: np.ndarray, Y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generator gradients for ``dO/dW_i = X Y_i^T`` summed over columns.

    ``X`` is ``(n, m)``, ``Y`` is ``(n, k, m)``. Returns ``(dG, dH, WY)`` with
    ``dG = sum_k (A^k)^T dW_i T^T (B^k)^T H``,
    ``dH = sum_k B^k T dW_i^T A^k G`` (both ``(n, k, r)``), and
    ``WY = sum_i W_i Y_i`` of shape ``(n, m)``.
    """
    A, B = pair.A, pair.B
    u = X
    p = pair.apply_T(Y)
    dG = np.zeros_like(G)
    dH = np.zeros_like(H)
    cs = []
    for k in range(pair.q):
        if k:
            u = A.apply(u, transpose=True)
            p = B.apply(p)
        c = np.einsum("nkr,nkm->krm", H, p)
        d = np.einsum("nkr,nm->krm", G, u)
        dG += np.einsum("nm,krm->nkr", u, c)
        dH += np.einsum("nkm,krm->nkr", p, d)
        cs.append(c)
    z = np.einsum("nkr,krm->nm", G, cs[-1])
    for c in reversed(cs[:-1]):
        z = A.apply(z) + np.einsum("nkr,krm->nm", G, c)
    return dG, dH, z


class PowerKernel:
    """Stacked operator powers for small blocks.

    Holds ``A^k`` and ``B^k T`` for ``k < q`` so that building every dense
    block, and mapping a dense block gradient back onto the generators, are a
    few batched matmuls. Memory is ``2 q n^2``; the recursive kernels above
    remain the ``O(q n r)`` path. Generators use the ``(k, n, r)`` block-major
    layout.
    """

    MAX_ENTRIES = 1 << 18

    def __init__(self, pair: OperatorPair):
        n, q = pair.n, pair.q
        PA = np.empty((q, n, n))
        PB = np.empty((q, n, n))
        a = np.eye(n)
        b = pair.apply_T(np.eye(n))
        for k in range(q):
            PA[k] = a
            PB[k] = b
            a = pair.A.apply(a)
            b = pair.B.apply(b)
        self.q, self.n = q, n
        self.PA = PA  # A^k
        self.PB = PB  # B^k T
        self.PAt = PA.transpose(0, 2, 1).copy()
        self.PBt = PB.transpose(0, 2, 1).copy()
        # horizontal concatenations [X_0 | X_1 | ...] for summing over k
        self.PA_cat = PA.transpose(1, 0, 2).reshape(n, q * n)
        self.PAt_cat = self.PAt.transpose(1, 0, 2).reshape(n, q * n)
        self.PB_cat = PB.transpose(1, 0, 2).reshape(n, q * n)

    @classmethod
    def suitable(cls, pair: OperatorPair) -> bool:
        return pair.q * pair.n * pair.n <= cls.MAX_ENTRIES

    def materialize(self, G: np.ndarray, H: np.ndarray) -> np.ndarray:
        """Dense blocks ``W_i = sum_k A^k G_i H_i^T B^k T`` as ``(k, n, n)``."""
        q, n = self.q, self.n
        L = (G @ H.transpose(0, 2, 1))[:, None] @ self.PB  # (blocks, q, n, n)
        return self.PA_cat @ L.reshape(-1, q * n, n)

    def generator_grads(self, G: np.ndarray, H: np.ndarray, dW: np.ndarray):
        """``(dG, dH)`` from block gradients ``dW`` of shape ``(k, n, n)``.

        ``dG_i = sum_k (A^k)^T dW_i (B^k T)^T H_i`` and
        ``dH_i = sum_k B^k T dW_i^T A^k G_i``.
        """
        q, n, r = self.q, self.n, G.shape[2]
        Z = dW[:, None] @ (self.PBt @ H[:, None])  # (blocks, q, n, r)
        Y = dW.transpose(0, 2, 1)[:, None] @ (self.PA @ G[:, None])
        dG = self.PAt_cat @ Z.reshape(-1, q * n, r)
        dH = self.PB_cat @ Y.reshape(-1, q * n, r)
        return dG, dH


def power_kernel(pair: OperatorPair) -> PowerKernel:
    """Cached :class:`PowerKernel` for ``pair``."""
    kern = pair.__dict__.get("_power_kernel")
    if kern is None:
        kern = PowerKernel(pair)
        pair.__dict__["_power_kernel"] = kern
    return kern
