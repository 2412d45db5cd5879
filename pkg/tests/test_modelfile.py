import json

import numpy as np
import pytest

from ldrkit.errors import DimensionError, ModelFileError
from ldrkit.layer import LdrLayer, NetworkModel, init_layer, network_forward
from ldrkit.modelfile import (
    format_value,
    load_config,
    load_model,
    model_to_dict,
    save_config,
    save_model,
    write_csv,
)
from ldrkit.operators import make_pair, column_pair
from ldrkit.training import ExperimentConfig


def random_model(seed=0):
    rng = np.random.default_rng(seed)
    l1 = init_layer(6, 2, 1, column_pair(6), rng, "sigmoid")
    l2 = init_layer(12, 1, 2, make_pair("toeplitz", 12), rng, "relu")
    return NetworkModel([l1, l2], rng.standard_normal(12), rng.standard_normal(), {"note": "x"})


def test_round_trip_bitwise(tmp_path):
    model = random_model()
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    X = np.random.default_rng(1).standard_normal((100, 6))
    assert np.array_equal(network_forward(model, X), network_forward(back, X))
    for a, b in zip(model.layers, back.layers):
        assert np.array_equal(a.G, b.G) and np.array_equal(a.H, b.H) and np.array_equal(a.theta, b.theta)
        assert a.sigma == b.sigma
        assert a.pairs[0].descriptor() == b.pairs[0].descriptor()
    assert back.out_bias == model.out_bias and back.meta == model.meta


def test_save_is_deterministic(tmp_path):
    save_model(random_model(), tmp_path / "a.json")
    save_model(random_model(), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_per_block_operator_list(tmp_path):
    rng = np.random.default_rng(2)
    pairs = [column_pair(4), make_pair("toeplitz", 4)]
    base = init_layer(4, 2, 1, pairs[0], rng)
    layer = LdrLayer(pairs, base.G, base.H, base.theta)
    model = NetworkModel([layer], rng.standard_normal(8))
    d = model_to_dict(model)
    assert isinstance(d["layers"][0]["operators"], list)
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert [p.descriptor() for p in back.layers[0].pairs] == [p.descriptor() for p in pairs]
    x = rng.standard_normal(4)
    assert network_forward(back, x) == network_forward(model, x)


def test_truncated_file(tmp_path):
    path = tmp_path / "m.json"
    save_model(random_model(), path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFileError, match="malformed"):
        load_model(path)


def test_version_and_format_checked(tmp_path):
    d = model_to_dict(random_model())
    d["version"] = 2
    (tmp_path / "v.json").write_text(json.dumps(d))
    with pytest.raises(ModelFileError, match="version"):
        load_model(tmp_path / "v.json")
    d["version"] = 1
    d["format"] = "something"
    (tmp_path / "f.json").write_text(json.dumps(d))
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "f.json")


def test_dimension_mismatch_names_field(tmp_path):
    d = model_to_dict(random_model())
    d["layers"][0]["dims"]["n"] = 5
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(DimensionError, match=r"layers\[0\]\.G"):
        load_model(tmp_path / "m.json")
    d = model_to_dict(random_model())
    d["alpha"] = d["alpha"][:-1]
    (tmp_path / "a.json").write_text(json.dumps(d))
    with pytest.raises(DimensionError, match="alpha"):
        load_model(tmp_path / "a.json")


def test_missing_field(tmp_path):
    d = model_to_dict(random_model())
    del d["layers"][1]["H"]
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(ModelFileError, match=r"layers\[1\]\.H"):
        load_model(tmp_path / "m.json")


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_model(tmp_path / "absent.json")


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(k=4, target={"kind": "planted_ldr", "k": 2, "seed": 5}, optimizer={"lr": 0.02})
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


def test_config_rejects_unknown_keys_and_formats(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"format": "ldrkit-config", "rate": 1}))
    with pytest.raises(ValueError):
        load_config(tmp_path / "c.json")
    (tmp_path / "m.json").write_text(json.dumps({"format": "ldrkit-model"}))
    with pytest.raises(ModelFileError):
        load_config(tmp_path / "m.json")


def test_partial_config_uses_defaults(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"k": 3}))
    cfg = load_config(tmp_path / "c.json")
    assert cfg.k == 3 and cfg.input_dim == ExperimentConfig().input_dim


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(np.float64(1 / 3)) == repr(1 / 3)
    assert format_value(float("nan")) == "nan"
    assert format_value(-float("inf")) == "-inf"
    assert format_value(True) == "true" and format_value(np.bool_(False)) == "false"
    assert format_value(np.int64(7)) == "7"
    assert format_value("Z_1") == "Z_1"


def test_write_csv(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ("a", "b"), [{"a": 1, "b": 0.5}, {"a": 2, "b": float("nan")}])
    assert path.read_text() == "a,b\n1,0.5\n2,nan\n"
