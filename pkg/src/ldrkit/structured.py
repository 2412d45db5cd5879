"""The five classical structured families and their fast products.

Conventions (0-based indices):

* ``circulant(c)``:      ``C[i, j] = c[(i - j) mod n]`` (``c`` is the first column)
* ``toeplitz(col, row)``: ``T[i, j] = col[i - j]`` for ``i >= j``, ``row[j - i]`` otherwise
* ``hankel(col, row)``:  ``H[i, j] = h[i + j]`` with ``col`` the first column and
  ``row`` the last row (``row[0] == col[-1]``)
* ``vandermonde(t)``:    ``V[i, j] = t[i] ** j``
* ``cauchy(s, t)``:      ``C[i, j] = 1 / (s[i] - t[j])``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError, DimensionError
from .fourier import get_plan, next_pow2
from .operators import BarePair, OperatorPair, diagonal, unit_f_circulant

FAMILIES = ("circulant", "toeplitz", "hankel", "vandermonde", "cauchy")
CAUCHY_MIN_GAP = 1e-12


@dataclass(frozen=True, eq=False)
class StructuredMatrix:
    family: str
    n: int
    vectors: tuple[np.ndarray, ...]

    def __matmul__(self, x):
        return matvec(self, x)


def _vec(v, name: str) -> np.ndarray:
    v = np.array(v, dtype=float).ravel()
    v.setflags(write=False)
    if v.size == 0:
        raise DimensionError(f"{name} must be nonempty")
    return v


def make_structured(family: str, *vectors) -> StructuredMatrix:
    """Validate defining vectors and build a :class:`StructuredMatrix`."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    expected = {"circulant": 1, "vandermonde": 1}.get(family, 2)
    if len(vectors) != expected:
        raise ValueError(f"{family} takes {expected} defining vector(s), got {len(vectors)}")
    vs = tuple(_vec(v, f"vector {i}") for i, v in enumerate(vectors))
    n = vs[0].size
    if any(v.size != n for v in vs):
        raise DimensionError(f"{family} defining vectors differ in length")
    if family == "toeplitz" and vs[0][0] != vs[1][0]:
        raise ConstraintError("toeplitz requires col[0] == row[0]")
    if family == "hankel" and vs[0][-1] != vs[1][0]:
        raise ConstraintError("hankel requires col[-1] == row[0]")
    if family == "cauchy":
        gap = np.abs(vs[0][:, None] - vs[1][None, :]).min()
        if gap < CAUCHY_MIN_GAP:
            raise ConstraintError(f"cauchy requires s_i != t_j (min gap {gap:.2e})")
    return StructuredMatrix(family, n, vs)


def circulant(c):
    return make_structured("circulant", c)


def toeplitz(col, row=None):
    col = np.asarray(col, dtype=float)
    return make_structured("toeplitz", col, col if row is None else row)


def hankel(col, row):
    return make_structured("hankel", col, row)


def vandermonde(t):
    return make_structured("vandermonde", t)


def cauchy(s, t):
    return make_structured("cauchy", s, t)


def to_dense(S: StructuredMatrix) -> np.ndarray:
    n = S.n
    i, j = np.indices((n, n))
    if S.family == "circulant":
        return S.vectors[0][(i - j) % n]
    if S.family == "toeplitz":
        col, row = S.vectors
        return np.where(i >= j, col[np.clip(i - j, 0, None)], row[np.clip(j - i, 0, None)])
    if S.family == "hankel":
        col, row = S.vectors
        h = np.concatenate((col, row[1:]))
        return h[i + j]
    if S.family == "vandermonde":
        t = S.vectors[0]
        return t[:, None] ** np.arange(n)[None, :]
    s, t = S.vectors
    return 1.0 / (s[:, None] - t[None, :])


def _circular_convolve(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    plan = get_plan(c.size)
    return plan.inverse(plan.forward(c) * plan.forward(x)).real


def _toeplitz_matvec(col: np.ndarray, row: np.ndarray, x: np.ndarray) -> np.ndarray:
    n = col.size
    L = next_pow2(2 * n - 1)
    c = np.zeros(L)
    c[:n] = col
    if n > 1:
        c[L - n + 1:] = row[:0:-1]
    xp = np.zeros(L)
    xp[:n] = x
    return _circular_convolve(c, xp)[:n]


def matvec(S: StructuredMatrix, x) -> np.ndarray:
    """``to_dense(S) @ x`` using FFTs for circulant/Toeplitz/Hankel."""
    x = np.asarray(x, dtype=float)
    if x.shape != (S.n,):
        raise DimensionError(f"expected vector of length {S.n}, got shape {x.shape}")
    n = S.n
    if S.family == "circulant":
        c = S.vectors[0]
        if n == next_pow2(n):
            return _circular_convolve(c, x)
        return _toeplitz_matvec(c, np.concatenate((c[:1], c[:0:-1])), x)
    if S.family == "toeplitz":
        return _toeplitz_matvec(*S.vectors, x)
    if S.family == "hankel":
        col, row = S.vectors
        return _toeplitz_matvec(row, col[::-1], x[::-1])
    if S.family == "vandermonde":
        t = S.vectors[0]
        y = np.zeros(n)
        for xj in x[::-1]:
            y = y * t + xj
        return y
    s, t = S.vectors
    return (x[None, :] / (s[:, None] - t[None, :])).sum(axis=1)


def parameter_count(S: StructuredMatrix) -> int:
    """Stored defining scalars (Toeplitz and Hankel keep both vectors, 2n)."""
    return sum(v.size for v in S.vectors)


# Displacement conventions. Each family's operator pair exactly as tabulated,
# together with the displacement form in which the tabulated bound holds, and a
# Stein-form pair reaching the same bound.

RANK_BOUND = {"circulant": 2, "toeplitz": 2, "hankel": 2, "vandermonde": 1, "cauchy": 1}


def tabulated_operators(S: StructuredMatrix) -> tuple[str, OperatorPair]:
    """``(form, pair)``: the tabulated operators and the form meeting the bound.

    Circulant, Toeplitz, Vandermonde and Cauchy reach their bounds under the
    Sylvester form with these operators; Hankel reaches it under Stein.
    """
    n = S.n
    fam = S.family
    if fam in ("circulant", "toeplitz"):
        return "sylvester", _pair(unit_f_circulant(n, 1.0), unit_f_circulant(n, 0.0))
    if fam == "hankel":
        return "stein", _pair(unit_f_circulant(n, 0.0), unit_f_circulant(n, 1.0))
    if fam == "vandermonde":
        return "sylvester", _pair(diagonal(S.vectors[0]), unit_f_circulant(n, 0.0))
    s, t = S.vectors
    return "sylvester", _pair(diagonal(s), diagonal(t))


def stein_operators(S: StructuredMatrix) -> OperatorPair:
    """Operators under which the Stein displacement meets the tabulated bound."""
    n = S.n
    fam = S.family
    if fam in ("circulant", "toeplitz"):
        return _pair(unit_f_circulant(n, 1.0), unit_f_circulant(n, 0.0, transpose=True))
    if fam == "hankel":
        return _pair(unit_f_circulant(n, 0.0), unit_f_circulant(n, 1.0))
    if fam == "vandermonde":
        return _pair(diagonal(S.vectors[0]), unit_f_circulant(n, 0.0, transpose=True))
    s, t = S.vectors
    return _pair(diagonal(s), diagonal(1.0 / t))


def _pair(A, B):
    try:
        return OperatorPair(A, B)
    except ValueError:
        return BarePair(A, B)


def random_structured(family: str, n: int, rng: np.random.Generator) -> StructuredMatrix:
    """Random instance with well-separated nodes for Vandermonde/Cauchy."""
    if family == "circulant":
        return circulant(rng.standard_normal(n))
    if family == "toeplitz":
        col = rng.standard_normal(n)
        row = rng.standard_normal(n)
        row[0] = col[0]
        return toeplitz(col, row)
    if family == "hankel":
        col = rng.standard_normal(n)
        row = rng.standard_normal(n)
        row[0] = col[-1]
        return hankel(col, row)
    if family == "vandermonde":
        return vandermonde(rng.uniform(-1.0, 1.0, n))
    s = rng.uniform(1.0, 2.0, n)
    t = -rng.uniform(1.0, 2.0, n)
    return cauchy(s, t)
