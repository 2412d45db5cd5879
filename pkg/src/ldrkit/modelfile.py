"""Versioned JSON model and config files, and deterministic CSV tables.

Floats are written with ``repr`` precision, so a saved model reloads with
bit-identical parameters.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import DimensionError, ModelFileError
from .layer import LdrLayer, NetworkModel
from .operators import pair_from_descriptor
from .training import CONFIG_VERSION, ExperimentConfig

MODEL_FORMAT = "ldrkit-model"
MODEL_VERSION = 1
CONFIG_FORMAT = "ldrkit-config"


def _layer_record(layer: LdrLayer) -> dict[str, Any]:
    if all(p is layer.pairs[0] for p in layer.pairs):
        operators: Any = layer.pairs[0].descriptor()
    else:
        operators = [p.descriptor() for p in layer.pairs]
    return {
        "dims": {"n": layer.n, "k": layer.k, "r": layer.r},
        "activation": layer.sigma,
        "operators": operators,
        "G": layer.G.tolist(),
        "H": layer.H.tolist(),
        "theta": layer.theta.tolist(),
    }


def model_to_dict(model: NetworkModel) -> dict[str, Any]:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "layers": [_layer_record(layer) for layer in model.layers],
        "alpha": model.alpha.tolist(),
        "out_bias": model.out_bias,
        "meta": model.meta,
    }


def _field(d: dict, key: str, where: str):
    try:
        return d[key]
    except (KeyError, TypeError):
        raise ModelFileError(f"missing field {where}{key}") from None


def _array(value, shape: tuple[int, ...], name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ModelFileError(f"field {name} is not a numeric array") from None
    if arr.shape != shape:
        raise DimensionError(f"field {name} has shape {arr.shape}, dims require {shape}")
    return arr


def _pairs(desc, k: int, n: int, name: str):
    try:
        if isinstance(desc, dict):
            pairs = [pair_from_descriptor(desc)] * k
        else:
            if len(desc) != k:
                raise DimensionError(f"field {name} lists {len(desc)} pairs for k={k} blocks")
            cache: dict[str, Any] = {}
            pairs = []
            for d in desc:
                key = json.dumps(d, sort_keys=True)
                if key not in cache:
                    cache[key] = pair_from_descriptor(d)
                pairs.append(cache[key])
    except DimensionError:
        raise
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"field {name} is malformed: {exc}") from None
    for p in pairs:
        if p.n != n:
            raise DimensionError(f"field {name} has operator size {p.n}, dims require n={n}")
    return pairs


def model_from_dict(d: dict[str, Any]) -> NetworkModel:
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise ModelFileError("not a model file (missing or wrong 'format')")
    version = d.get("version")
    if version != MODEL_VERSION:
        raise ModelFileError(f"model file version {version!r} unsupported (expected {MODEL_VERSION})")
    layers = []
    for i, rec in enumerate(_field(d, "layers", "")):
        where = f"layers[{i}]."
        dims = _field(rec, "dims", where)
        n, k, r = (int(_field(dims, key, where + "dims.")) for key in ("n", "k", "r"))
        G = _array(_field(rec, "G", where), (k, n, r), where + "G")
        H = _array(_field(rec, "H", where), (k, n, r), where + "H")
        theta = _array(_field(rec, "theta", where), (k * n,), where + "theta")
        pairs = _pairs(_field(rec, "operators", where), k, n, where + "operators")
        layers.append(LdrLayer(pairs, G, H, theta, _field(rec, "activation", where)))
    if not layers:
        raise ModelFileError("model file has no layers")
    alpha = _array(_field(d, "alpha", ""), (layers[-1].width,), "alpha")
    return NetworkModel(layers, alpha, float(_field(d, "out_bias", "")), dict(d.get("meta", {})))


def _dump(obj: Any, path) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=True)
    Path(path).write_text(text + "\n")


def _load(path) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: malformed file ({exc.msg} at line {exc.lineno})") from None


def save_model(model: NetworkModel, path) -> None:
    _dump(model_to_dict(model), path)


def load_model(path) -> NetworkModel:
    return model_from_dict(_load(path))


def save_config(cfg: ExperimentConfig, path) -> None:
    _dump({"format": CONFIG_FORMAT, **cfg.to_dict()}, path)


def load_config(path) -> ExperimentConfig:
    d = _load(path)
    if not isinstance(d, dict):
        raise ModelFileError(f"{path}: config must be a JSON object")
    fmt = d.pop("format", CONFIG_FORMAT)
    if fmt != CONFIG_FORMAT:
        raise ModelFileError(f"{path}: not a config file (format {fmt!r})")
    d.setdefault("version", CONFIG_VERSION)
    return ExperimentConfig.from_dict(d)


def format_value(v: Any) -> str:
    """Stable text for a CSV cell: ``repr`` precision floats, fixed nan/inf."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_value(row[c]) for c in columns])
