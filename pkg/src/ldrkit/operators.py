"""Displacement operators and operator pairs.

An :class:`OperatorMatrix` is one of three kinds:

* ``unit_f_circulant`` -- the cyclic down-shift ``Z_f`` whose wrap-around
  entry ``Z_f[0, n-1]`` is ``f`` (or its transpose, the up-shift, when
  ``transpose`` is set),
* ``diagonal`` -- ``diag(d)``,
* ``dense`` -- an explicit ``n x n`` matrix.

All operators act on the leading axis of an array, so stacks of vectors
with shape ``(n, ...)`` are handled without reshaping.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from .errors import (
    DimensionError,
    NotDiagonalizableError,
    PotencyError,
    SingularOperatorError,
)

TOL_POTENCY = 1e-10
TOL_EIG = 1e-10
COND_MAX = 1e12
SEP_MIN = 1e-8

KINDS = ("unit_f_circulant", "diagonal", "dense")


@dataclass(frozen=True)
class EigenDecomp:
    """``A = Q_inv @ diag(lam) @ Q`` (complex)."""

    Q: np.ndarray
    lam: np.ndarray
    Q_inv: np.ndarray

    def residual(self, A: np.ndarray) -> float:
        recon = (self.Q_inv * self.lam) @ self.Q
        return float(np.abs(recon - A).sum(axis=1).max())


def _readonly(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    kind: str
    n: int
    f: float = 0.0
    transpose: bool = False
    d: np.ndarray | None = None
    M: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.n < 1:
            raise DimensionError("operator dimension must be positive")

    # -- application -------------------------------------------------------

    def apply(self, X: np.ndarray, transpose: bool = False) -> np.ndarray:
        """Return ``A @ X`` (or ``A.T @ X``) along the leading axis of ``X``."""
        X = np.asarray(X)
        if X.shape[0] != self.n:
            raise DimensionError(
                f"operator of size {self.n} applied to leading axis {X.shape[0]}"
            )
        if self.kind == "unit_f_circulant":
            out = np.empty(X.shape, dtype=np.result_type(X, float))
            if self.transpose == transpose:
                out[1:] = X[:-1]
                out[0] = self.f * X[-1]
            else:
                out[:-1] = X[1:]
                out[-1] = self.f * X[0]
            return out
        if self.kind == "diagonal":
            return self.d.reshape((self.n,) + (1,) * (X.ndim - 1)) * X
        M = self.M.T if transpose else self.M
        return np.tensordot(M, X, axes=(1, 0))

    def apply_right(self, X: np.ndarray) -> np.ndarray:
        """Return ``X @ A`` for a 2-D ``X``."""
        return self.apply(np.asarray(X).T, transpose=True).T

    def __matmul__(self, X):
        return self.apply(X)

    @cached_property
    def dense(self) -> np.ndarray:
        return _readonly(self.apply(np.eye(self.n)))

    def power(self, q: int) -> np.ndarray:
        P = np.eye(self.n)
        for _ in range(q):
            P = self.apply(P)
        return P

    @cached_property
    def norm_inf(self) -> float:
        return float(np.abs(self.dense).sum(axis=1).max())

    # -- cached spectral data ---------------------------------------------

    @cached_property
    def potency(self) -> tuple[int, float] | None:
        return check_potency(self, self.n)

    @cached_property
    def eig(self) -> EigenDecomp:
        return eigendecompose(self)

    def parameter_count(self) -> int:
        """Stored scalars describing this operator."""
        if self.kind == "unit_f_circulant":
            return 1
        if self.kind == "diagonal":
            return self.n
        return self.n * self.n

    # -- serialization -----------------------------------------------------

    def descriptor(self) -> dict[str, Any]:
        if self.kind == "unit_f_circulant":
            return {
                "kind": self.kind,
                "n": self.n,
                "f": float(self.f),
                "transpose": bool(self.transpose),
            }
        if self.kind == "diagonal":
            return {"kind": self.kind, "n": self.n, "d": self.d.tolist()}
        return {"kind": self.kind, "n": self.n, "M": self.M.tolist()}

    def label(self) -> str:
        if self.kind == "unit_f_circulant":
            f = int(self.f) if float(self.f).is_integer() else self.f
            return f"Z_{f}" + ("^T" if self.transpose else "")
        if self.kind == "diagonal":
            return "diag"
        return "dense"


def unit_f_circulant(n: int, f: float = 1.0, transpose: bool = False) -> OperatorMatrix:
    return OperatorMatrix("unit_f_circulant", int(n), f=float(f), transpose=bool(transpose))


def diagonal(d) -> OperatorMatrix:
    d = _readonly(np.ravel(d))
    return OperatorMatrix("diagonal", d.size, d=d)


def dense(M) -> OperatorMatrix:
    M = _readonly(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"dense operator must be square, got shape {M.shape}")
    return OperatorMatrix("dense", M.shape[0], M=M)


def from_descriptor(desc: dict[str, Any]) -> OperatorMatrix:
    kind = desc.get("kind")
    if kind == "unit_f_circulant":
        return unit_f_circulant(desc["n"], desc.get("f", 1.0), desc.get("transpose", False))
    if kind == "diagonal":
        op = diagonal(desc["d"])
    elif kind == "dense":
        op = dense(desc["M"])
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    if "n" in desc and desc["n"] != op.n:
        raise DimensionError(f"operator descriptor declares n={desc['n']} but holds {op.n}")
    return op


def check_potency(
    A: OperatorMatrix, q_max: int | None = None, tol: float = TOL_POTENCY
) -> tuple[int, float] | None:
    """Smallest ``q <= q_max`` with ``A^q = a I`` for a nonzero scalar ``a``.

    The test runs on ``A / ||A||_inf`` so ``tol`` is an absolute tolerance
    on the normalized powers.
    """
    n = A.n
    q_max = n if q_max is None else q_max
    if q_max > n:
        raise ValueError(f"q_max={q_max} exceeds operator size {n}")
    if A.kind == "unit_f_circulant":
        if A.f == 0.0:
            return None
        return (n, float(A.f)) if n <= q_max else None
    scale = A.norm_inf
    if scale == 0.0:
        return None
    Ahat = A.dense / scale
    P = np.eye(n)
    for q in range(1, q_max + 1):
        P = Ahat @ P
        a_hat = np.trace(P) / n
        if abs(a_hat) <= tol:
            continue
        if np.abs(P - a_hat * np.eye(n)).max() <= tol:
            return q, float(a_hat * scale**q)
    return None


def _fourier_matrix(n: int) -> np.ndarray:
    idx = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * idx / n)


def eigendecompose(A: OperatorMatrix, tol: float = TOL_EIG) -> EigenDecomp:
    """Diagonalize ``A`` as ``Q_inv @ diag(lam) @ Q``.

    ``Z_f`` uses the closed-form scaled Fourier diagonalization; diagonal
    operators are trivial; dense operators go through ``numpy.linalg.eig``
    and are rejected when the residual exceeds ``tol * ||A||_inf``.
    """
    n = A.n
    if A.kind == "diagonal":
        I = np.eye(n, dtype=complex)
        return EigenDecomp(I, A.d.astype(complex), I.copy())
    if A.kind == "unit_f_circulant":
        if A.f == 0.0:
            if n == 1:
                I = np.eye(1, dtype=complex)
                return EigenDecomp(I, np.zeros(1, complex), I.copy())
            raise NotDiagonalizableError("Z_0 is nilpotent and not diagonalizable")
        # Z_f = D (c Z_1) D^-1 with D = diag(c^-i), and Z_1 = F^-1 diag(w^k) F.
        c = complex(A.f) ** (1.0 / n)
        i = np.arange(n)
        omega = np.exp(-2j * np.pi * i / n)
        F = _fourier_matrix(n)
        Finv = F.conj().T / n
        Dinv = c**i
        Q = F * Dinv[None, :]
        Q_inv = Finv / Dinv[:, None]
        lam = c * omega
        if A.transpose:
            Q, Q_inv = Q_inv.T, Q.T
        return EigenDecomp(Q, lam, Q_inv)
    w, V = np.linalg.eig(A.M)
    if np.linalg.cond(V) > COND_MAX:
        raise NotDiagonalizableError("eigenvector matrix is numerically singular")
    ed = EigenDecomp(np.linalg.inv(V), w.astype(complex), V.astype(complex))
    if ed.residual(A.M) > tol * max(A.norm_inf, 1.0):
        raise NotDiagonalizableError(
            f"eigendecomposition residual {ed.residual(A.M):.2e} above tolerance"
        )
    return ed


class OperatorPair:
    """Operators ``(A, B)`` with ``A^q = a I`` and cached ``T = (I - a B^q)^-1``."""

    def __init__(
        self,
        A: OperatorMatrix,
        B: OperatorMatrix,
        cond_max: float = COND_MAX,
        sep_min: float = SEP_MIN,
    ):
        if A.n != B.n:
            raise DimensionError(f"operator sizes differ: A is {A.n}, B is {B.n}")
        pot = A.potency
        if pot is None:
            raise PotencyError(f"operator {A.label()} has no potency A^q = aI with a != 0")
        self.A = A
        self.B = B
        self.n = A.n
        self.q, self.a = pot
        self.sep_min = sep_min
        n, q, a = self.n, self.q, self.a

        if B.kind == "unit_f_circulant" and B.f == 0.0 and q >= n:
            self.t_kind = "identity"
            T = np.eye(n)
            cond = 1.0
        elif B.kind == "diagonal":
            k = 1.0 - a * B.d**q
            mags = np.abs(k)
            cond = np.inf if mags.min() == 0 else mags.max() / mags.min()
            self.t_kind = "identity" if np.all(k == 1.0) else "diagonal"
            T = np.diag(1.0 / k) if mags.min() > 0 else None
        else:
            Bq = B.power(q)
            if not Bq.any():
                self.t_kind = "identity"
                T = np.eye(n)
                cond = 1.0
            else:
                K = np.eye(n) - a * Bq
                cond = np.linalg.cond(K)
                self.t_kind = "dense"
                T = np.linalg.inv(K) if np.isfinite(cond) else None
        if not np.isfinite(cond) or cond > cond_max:
            raise SingularOperatorError(
                f"I - a B^q has condition number {cond:.3e} (limit {cond_max:.0e})"
            )
        self.cond = float(cond)
        T = _readonly(T)
        self.T = T
        self._t_diag = np.diag(T).copy() if self.t_kind == "diagonal" else None

    def apply_T(self, X: np.ndarray, transpose: bool = False) -> np.ndarray:
        if self.t_kind == "identity":
            return X
        if self.t_kind == "diagonal":
            return self._t_diag.reshape((self.n,) + (1,) * (X.ndim - 1)) * X
        T = self.T.T if transpose else self.T
        return np.tensordot(T, X, axes=(1, 0))

    def embedding_issues(self) -> list[str]:
        """Reasons the pair fails the column-embedding conditions (empty if none)."""
        issues = []
        try:
            la = self.A.eig.lam
        except NotDiagonalizableError:
            return ["A is not diagonalizable"]
        try:
            lb = self.B.eig.lam
        except NotDiagonalizableError:
            return ["B is not diagonalizable"]
        if np.abs(la).min() <= TOL_EIG * max(np.abs(la).max(), 1.0):
            issues.append("A is singular")
        if np.abs(lb).min() <= TOL_EIG * max(np.abs(lb).max(), 1.0):
            issues.append("B is singular")
        mods = np.sort(np.abs(lb))
        if self.n > 1 and np.diff(mods).min() < self.sep_min:
            issues.append(
                f"eigenvalues of B have moduli closer than {self.sep_min:.0e}"
            )
        return issues

    @cached_property
    def embeddable(self) -> bool:
        return not self.embedding_issues()

    def descriptor(self) -> dict[str, Any]:
        return {"A": self.A.descriptor(), "B": self.B.descriptor()}

    def label(self) -> str:
        return f"({self.A.label()}, {self.B.label()})"

    def __repr__(self) -> str:
        return f"OperatorPair{self.label()} n={self.n} q={self.q} a={self.a:g}"


class BarePair:
    """Two operators with no potency requirement; enough for displacement
    and rank evaluation but not for decompression."""

    def __init__(self, A: OperatorMatrix, B: OperatorMatrix):
        if A.n != B.n:
            raise DimensionError(f"operator sizes differ: A is {A.n}, B is {B.n}")
        self.A, self.B, self.n = A, B, A.n

    def label(self) -> str:
        return f"({self.A.label()}, {self.B.label()})"


def pair_from_descriptor(desc: dict[str, Any]) -> OperatorPair:
    return OperatorPair(from_descriptor(desc["A"]), from_descriptor(desc["B"]))


def require_embeddable(pair: OperatorPair) -> OperatorPair:
    issues = pair.embedding_issues()
    if issues:
        raise ValueError("operator pair not usable for column embedding: " + "; ".join(issues))
    return pair


# Named pairs used by the trainer and the CLI.

def column_pair(n: int) -> OperatorPair:
    """``(Z_1, diag(1/(n+1), ..., n/(n+1)))``: satisfies all embedding conditions."""
    return OperatorPair(unit_f_circulant(n, 1.0), diagonal(np.arange(1, n + 1) / (n + 1)))


def toeplitz_pair(n: int) -> OperatorPair:
    """``(Z_1, Z_0^T)``: Toeplitz-like blocks, ``T = I``."""
    return OperatorPair(unit_f_circulant(n, 1.0), unit_f_circulant(n, 0.0, transpose=True))


def lowrank_pair(n: int) -> OperatorPair:
    """``(I, 0)``: ``q = 1`` and the block is the plain product ``G H^T``."""
    return OperatorPair(diagonal(np.ones(n)), diagonal(np.zeros(n)))


PRESETS = {
    "column": column_pair,
    "toeplitz": toeplitz_pair,
    "lowrank": lowrank_pair,
}


def make_pair(preset, n: int) -> OperatorPair:
    """Build a pair from a preset name or an ``{"A": ..., "B": ...}`` descriptor."""
    if isinstance(preset, str):
        try:
            return PRESETS[preset](n)
        except KeyError:
            raise ValueError(
                f"unknown operator preset {preset!r}; choose from {sorted(PRESETS)}"
            ) from None
    pair = pair_from_descriptor(preset)
    if pair.n != n:
        raise DimensionError(f"operator pair has n={pair.n}, expected {n}")
    return pair
