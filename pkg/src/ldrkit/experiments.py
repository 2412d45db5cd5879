"""Rank sweeps, matvec benchmarks and batch column constructions.

Each function returns plain rows (lists of dicts) so the CLI can write
them as CSV and the tests can inspect them directly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .construct import ColumnEmbedding, construct_with_column, find_selector
from .displacement import RANK_TOL, displacement_rank
from .errors import DimensionError
from .operators import OperatorPair
from .structured import (
    FAMILIES,
    RANK_BOUND,
    matvec,
    parameter_count,
    random_structured,
    stein_operators,
    tabulated_operators,
    to_dense,
)
from .training import loglog_slope

RANK_COLUMNS = ("family", "n", "trial", "form", "A", "B", "rank", "bound", "stein_rank", "ok")
BENCH_COLUMNS = (
    "family",
    "n",
    "structured_params",
    "ldr_params",
    "dense_params",
    "structured_seconds",
    "dense_seconds",
)
BENCH_VOLATILE = ("structured_seconds", "dense_seconds")
CONSTRUCT_COLUMNS = ("index", "n", "j", "residual", "displacement_rank", "certified")


def rank_sweep(
    families=FAMILIES,
    sizes=(4, 8, 16, 32),
    trials: int = 20,
    seed: int = 0,
    tol: float = RANK_TOL,
) -> list[dict]:
    """Displacement rank of random instances against the tabulated bound.

    ``rank`` uses the tabulated operators in the form where the bound holds;
    ``stein_rank`` is the Stein displacement rank under Stein-compatible
    operators. A row is ``ok`` when both are within the bound.
    """
    rows = []
    for fam in families:
        if fam not in FAMILIES:
            raise ValueError(f"unknown family {fam!r}; expected one of {FAMILIES}")
        fam_id = FAMILIES.index(fam)
        for n in sizes:
            if n < 3:
                raise ValueError(f"rank sweep sizes must be at least 3, got {n}")
            for trial in range(trials):
                rng = np.random.default_rng([seed, fam_id, n, trial])
                S = random_structured(fam, n, rng)
                M = to_dense(S)
                form, pair = tabulated_operators(S)
                rank = displacement_rank(M, pair, tol=tol, form=form)
                stein = displacement_rank(M, stein_operators(S), tol=tol, form="stein")
                bound = RANK_BOUND[fam]
                rows.append(
                    {
                        "family": fam,
                        "n": n,
                        "trial": trial,
                        "form": form,
                        "A": pair.A.label(),
                        "B": pair.B.label(),
                        "rank": rank,
                        "bound": bound,
                        "stein_rank": stein,
                        "ok": rank <= bound and stein <= bound,
                    }
                )
    return rows


def _median_time(fn, repeats: int, number: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t0) / number)
    return float(np.median(times))


@dataclass
class BenchReport:
    rows: list[dict]
    slope: float


def bench(
    sizes=(256, 512, 1024, 2048, 4096, 8192, 16384),
    family: str = "circulant",
    repeats: int = 5,
    seed: int = 0,
    dense_max: int = 4096,
    rank: int | None = None,
) -> BenchReport:
    """Median matvec times (structured vs dense) and analytic parameter counts.

    Dense timings are skipped (``nan``) above ``dense_max`` to bound memory.
    ``ldr_params`` is ``2n + 2nr`` with ``r`` defaulting to the family's
    displacement rank bound. ``slope`` is the log-log slope of the structured
    times.
    """
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("bench sizes must be sorted ascending")
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    r = RANK_BOUND[family] if rank is None else rank
    rows = []
    for n in sizes:
        rng = np.random.default_rng([seed, n])
        S = random_structured(family, n, rng)
        x = rng.standard_normal(n)
        number = max(1, 4096 // n)
        t_struct = _median_time(lambda: matvec(S, x), repeats, number)
        t_dense = float("nan")
        if n <= dense_max:
            D = to_dense(S)
            t_dense = _median_time(lambda: D @ x, repeats, number)
            del D
        rows.append(
            {
                "family": family,
                "n": n,
                "structured_params": parameter_count(S),
                "ldr_params": 2 * n + 2 * n * r,
                "dense_params": n * n,
                "structured_seconds": t_struct,
                "dense_seconds": t_dense,
            }
        )
    slope = loglog_slope([row["n"] for row in rows], [row["structured_seconds"] for row in rows])
    return BenchReport(rows, slope)


def read_vectors(path, n: int) -> np.ndarray:
    """One vector per line (whitespace or comma separated), each of length ``n``."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    vecs = []
    for lineno, ln in enumerate(lines, 1):
        if not ln or ln.startswith("#"):
            continue
        try:
            v = [float(tok) for tok in ln.replace(",", " ").split()]
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric entry") from None
        if len(v) != n:
            raise DimensionError(f"{path}:{lineno}: vector has {len(v)} entries, expected {n}")
        vecs.append(v)
    if not vecs:
        raise ValueError(f"{path}: no vectors found")
    return np.array(vecs)


def construct_batch(pair: OperatorPair, V: np.ndarray, seed: int = 0) -> list[ColumnEmbedding]:
    """Certified column embeddings for every row of ``V`` with one shared selector."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[1] != pair.n:
        raise DimensionError(f"vectors have length {V.shape[1]}, operator pair has n={pair.n}")
    sel = find_selector(pair, seed)
    return [construct_with_column(pair, v, selector=sel) for v in V]


def embedding_record(emb: ColumnEmbedding) -> dict:
    rank = displacement_rank(emb.matrix(), emb.rep.pair)
    return {
        "format": "ldrkit-construct",
        "version": 1,
        "operators": emb.rep.pair.descriptor(),
        "n": emb.rep.n,
        "j": emb.j,
        "g": emb.g.tolist(),
        "h": emb.h.tolist(),
        "v": emb.v.tolist(),
        "residual": emb.residual,
        "displacement_rank": rank,
    }
