"""``ldrkit`` command-line interface.

Exit codes: 0 success, 1 validation error, 2 certificate or invariant
failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import CertificateError, InvariantError, LdrError, SelectorError, TrainingError
from .modelfile import load_config, save_model, write_csv
from .operators import make_pair
from .training import ExperimentConfig, decay, is_monotone, train

log = logging.getLogger("ldrkit")

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3

TRAIN_COLUMNS = ("restart", "train_mse", "selected")
HISTORY_COLUMNS = ("epoch", "train_mse")
DECAY_COLUMNS = ("k", "eval_mse", "train_mse", "bound", "failed")
DECAY_SUMMARY_COLUMNS = ("surrogate_C", "slope", "radius", "monotone")


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    d = cfg.to_dict()
    if args.seed is not None:
        d["seed"] = args.seed
    if getattr(args, "k", None) is not None:
        d["k"] = args.k
    if getattr(args, "k_grid", None) is not None:
        d["k_grid"] = args.k_grid
    for key in ("epochs", "restarts", "lr"):
        value = getattr(args, key, None)
        if value is not None:
            d["optimizer"][key] = value
    return ExperimentConfig.from_dict(d)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _outdir(args)
    fit = train(cfg)
    if fit.failed:
        raise TrainingError("every restart diverged")
    fit.model.meta.update({"k": fit.k, "seed": cfg.seed, "restart": fit.restart})
    save_model(fit.model, out / "model.json")
    write_csv(
        out / "history.csv",
        HISTORY_COLUMNS,
        ({"epoch": i + 1, "train_mse": v} for i, v in enumerate(fit.history)),
    )
    write_csv(
        out / "restarts.csv",
        TRAIN_COLUMNS,
        (
            {"restart": i, "train_mse": v, "selected": i == fit.restart}
            for i, v in enumerate(fit.restart_train_mse)
        ),
    )
    print(f"k={fit.k} restart={fit.restart} train_mse={fit.train_mse:.6e} eval_mse={fit.eval_mse:.6e}")
    return EXIT_OK


def cmd_decay(args) -> int:
    cfg = _config(args)
    out = _outdir(args)
    rep = decay(cfg)
    write_csv(out / "decay.csv", DECAY_COLUMNS, (vars(r) for r in rep.rows))
    monotone = is_monotone(rep.errors(), cfg.monotone_tol)
    write_csv(
        out / "decay_summary.csv",
        DECAY_SUMMARY_COLUMNS,
        [{"surrogate_C": rep.surrogate_C, "slope": rep.slope, "radius": rep.radius, "monotone": monotone}],
    )
    for r in rep.rows:
        flag = "  FAILED" if r.failed else ""
        print(f"k={r.k:<4d} eval_mse={r.eval_mse:.4e} bound={r.bound:.4e}{flag}")
    print(f"surrogate-C={rep.surrogate_C:.4e} slope={rep.slope:.3f} monotone={monotone}")
    if not monotone:
        raise InvariantError(f"error is not nonincreasing in k within {cfg.monotone_tol:.0%}")
    return EXIT_OK


def cmd_rank_sweep(args) -> int:
    out = _outdir(args)
    rows = ex.rank_sweep(args.families, args.sizes, args.trials, args.seed or 0)
    write_csv(out / "rank_sweep.csv", ex.RANK_COLUMNS, rows)
    bad = [r for r in rows if not r["ok"]]
    print(f"{len(rows) - len(bad)}/{len(rows)} instances within the displacement rank bound")
    if bad:
        raise InvariantError(f"{len(bad)} instances exceed their bound")
    return EXIT_OK


def cmd_construct(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        operators, n = cfg.operators, cfg.input_dim
    else:
        operators, n = args.operators, args.n
    pair = make_pair(operators, n)
    if args.vectors:
        V = ex.read_vectors(args.vectors, n)
    else:
        if not 0 <= args.unit < n:
            raise ValueError(f"--unit must lie in [0, {n})")
        V = np.eye(n)[args.unit][None, :]
    out = _outdir(args)
    embeddings = ex.construct_batch(pair, V, args.seed or 0)
    rows = []
    for i, emb in enumerate(embeddings):
        rec = ex.embedding_record(emb)
        (out / f"construct_{i:04d}.json").write_text(json.dumps(rec, indent=1, sort_keys=True) + "\n")
        rows.append(
            {
                "index": i,
                "n": n,
                "j": emb.j,
                "residual": emb.residual,
                "displacement_rank": rec["displacement_rank"],
                "certified": rec["displacement_rank"] <= 1,
            }
        )
    write_csv(out / "construct.csv", ex.CONSTRUCT_COLUMNS, rows)
    worst = max(r["residual"] for r in rows)
    print(f"{len(rows)} embeddings certified, worst column residual {worst:.3e}")
    if not all(r["certified"] for r in rows):
        raise CertificateError("a constructed matrix has displacement rank above 1")
    return EXIT_OK


def cmd_bench(args) -> int:
    out = _outdir(args)
    rep = ex.bench(args.sizes, args.family, args.repeats, args.seed or 0, args.dense_max)
    write_csv(out / "bench.csv", ex.BENCH_COLUMNS, rep.rows)
    for r in rep.rows:
        print(
            f"n={r['n']:<6d} structured={r['structured_seconds']:.3e}s "
            f"dense={r['dense_seconds']:.3e}s params {r['structured_params']} vs {r['dense_params']}"
        )
    print(f"log-log slope of structured matvec time: {rep.slope:.3f}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors, not argparse's default exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ldrkit", description="LDR structured-matrix toolkit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--seed", type=_seed, help="override the seed")
        sp.add_argument("--out", default="out", help="output directory (default: out)")

    def optim(sp):
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--restarts", type=int)
        sp.add_argument("--lr", type=float)

    sp = sub.add_parser("train", help="fit one network, write model.json and history.csv")
    common(sp)
    optim(sp)
    sp.add_argument("--k", type=int, help="number of LDR blocks")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("decay", help="best-of-restarts error over the k grid")
    common(sp)
    optim(sp)
    sp.add_argument("--k-grid", type=_int_list, dest="k_grid", help="e.g. 1,2,4,8,16")
    sp.set_defaults(func=cmd_decay)

    sp = sub.add_parser("rank-sweep", help="displacement ranks of random structured matrices")
    common(sp, config=False)
    sp.add_argument("--families", type=lambda s: s.split(","), default=list(ex.FAMILIES))
    sp.add_argument("--sizes", type=_int_list, default=[4, 8, 16, 32])
    sp.add_argument("--trials", type=int, default=20)
    sp.set_defaults(func=cmd_rank_sweep)

    sp = sub.add_parser("construct", help="embed vectors as columns of rank-1 displacement matrices")
    common(sp)
    sp.add_argument("--operators", default="column", help="operator preset name")
    sp.add_argument("--n", type=int, default=8)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--vectors", help="file with one vector per line")
    src.add_argument("--unit", type=int, default=0, help="embed the basis vector e_UNIT")
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("bench", help="structured vs dense matvec timings")
    common(sp, config=False)
    sp.add_argument("--sizes", type=_int_list, default=[256, 512, 1024, 2048, 4096, 8192, 16384])
    sp.add_argument("--family", default="circulant", choices=ex.FAMILIES)
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--dense-max", type=int, default=4096, dest="dense_max")
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CertificateError, SelectorError, InvariantError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, LdrError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
