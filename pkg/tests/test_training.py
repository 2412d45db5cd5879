import numpy as np
import pytest

from ldrkit.errors import ModelFileError
from ldrkit.layer import network_forward
from ldrkit.training import (
    ExperimentConfig,
    decay,
    fit_best_of_restarts,
    is_monotone,
    loglog_slope,
    make_data,
    make_target,
    mse,
    planted_model,
    sample_ball,
    surrogate_C,
    target_scaling,
    train,
    unscale_model,
)


def small(**kw):
    base = dict(input_dim=4, train_samples=64, eval_samples=128, optimizer={"epochs": 20, "restarts": 2})
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize(
    "kw",
    [
        {"target": {"kind": "unknown"}},
        {"domain_radius": 0.0},
        {"k": 0},
        {"k_grid": [2, 1]},
        {"k_grid": []},
        {"optimizer": {"lr": -1.0}},
        {"train_samples": 0},
        {"monotone_tol": 0.0},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


def test_config_version_and_unknown_keys():
    with pytest.raises(ModelFileError):
        ExperimentConfig(version=99)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"learning_rate": 0.1})


def test_config_dict_round_trip():
    cfg = small(k=3, target={"kind": "sinusoid", "frequency": 2.0})
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_sample_ball_inside_and_spread():
    rng = np.random.default_rng(0)
    X = sample_ball(20000, 3, 2.0, rng)
    norms = np.linalg.norm(X, axis=1)
    assert norms.max() <= 2.0
    # uniform on the ball: P(|x| <= r/2) = 1/8 in three dimensions
    assert abs(np.mean(norms <= 1.0) - 0.125) < 0.01
    assert np.abs(X.mean(axis=0)).max() < 0.03


def test_targets():
    X = np.zeros((2, 4))
    assert np.array_equal(make_target(small())(X), [1.0, 1.0])
    assert np.array_equal(make_target(small(target={"kind": "sinusoid"}))(X), [0.0, 0.0])
    assert np.array_equal(make_target(small(target={"kind": "constant", "value": 3.0}))(X), [3.0, 3.0])
    cfg = small(target={"kind": "planted_ldr", "k": 2})
    np.testing.assert_array_equal(make_target(cfg)(X), network_forward(planted_model(cfg), X))


def test_target_scaling_and_unscale_are_exact():
    y = np.array([1.0, 2.0, 4.0])
    shift, scale = target_scaling(y)
    assert abs(np.mean((y - shift) / scale)) < 1e-15 and abs(np.std((y - shift) / scale) - 1) < 1e-15
    assert target_scaling(np.full(5, 7.0)) == (7.0, 1.0)
    assert target_scaling(y, enabled=False) == (0.0, 1.0)
    cfg = small(target={"kind": "planted_ldr"})
    model = planted_model(cfg)
    X = sample_ball(10, 4, 1.0, np.random.default_rng(1))
    before = network_forward(model, X)
    unscale_model(model, 0.5, 3.0)
    np.testing.assert_allclose(network_forward(model, X), 3.0 * before + 0.5, atol=1e-14)


@pytest.mark.parametrize("value", [0.0, -1.5])
def test_constant_target_fits_exactly(value):
    res = train(small(target={"kind": "constant", "value": value}, optimizer={"epochs": 5, "restarts": 1}))
    assert res.train_mse <= 1e-8 and res.eval_mse <= 1e-8
    assert not res.model.alpha.any()


def test_deterministic_given_seed():
    a = train(small(seed=3))
    b = train(small(seed=3))
    assert a.train_mse == b.train_mse and a.restart == b.restart
    assert np.array_equal(a.model.alpha, b.model.alpha)
    assert np.array_equal(a.model.layers[0].G, b.model.layers[0].G)
    c = train(small(seed=4))
    assert c.train_mse != a.train_mse


def test_best_restart_is_selected():
    res = train(small(optimizer={"epochs": 10, "restarts": 4}))
    assert res.train_mse == min(res.restart_train_mse)
    assert res.restart_train_mse[res.restart] == res.train_mse
    X, y, _, _ = make_data(small())
    assert res.train_mse == mse(res.model, X, y)
    assert len(res.history) == 10
    # the kept iterate is the best epoch, not necessarily the last
    assert res.train_mse == pytest.approx(min(res.history), rel=1e-9)


def test_keep_best_off_keeps_last_epoch():
    res = train(small(optimizer={"epochs": 10, "restarts": 1, "keep_best": False}))
    assert res.train_mse == pytest.approx(res.history[-1], rel=1e-9)


def test_training_reduces_error():
    cfg = small(target={"kind": "sinusoid"}, optimizer={"epochs": 100, "restarts": 1})
    X, y, Xe, ye = make_data(cfg)
    res = fit_best_of_restarts(cfg, 2, X, y, Xe, ye)
    assert res.history[-1] < 0.5 * np.var(y)


def test_diverged_restarts_are_marked_failed():
    cfg = small(target={"kind": "sinusoid"}, optimizer={"epochs": 50, "restarts": 2, "lr": 1e6})
    res = train(cfg)
    assert res.failed and res.model is None
    assert all(np.isnan(v) for v in res.restart_train_mse)


@pytest.mark.slow
def test_more_blocks_fit_sinusoid_no_worse():
    # larger k contains smaller k by zero-padding, so the fit cannot be worse
    cfg = ExperimentConfig(target={"kind": "sinusoid", "frequency": 1.0})
    X, y, Xe, ye = make_data(cfg)
    e1 = fit_best_of_restarts(cfg, 1, X, y, Xe, ye).train_mse
    e8 = fit_best_of_restarts(cfg, 8, X, y, Xe, ye).train_mse
    assert e8 <= e1


def test_is_monotone():
    assert is_monotone([1.0, 0.5, 0.51, 0.2], 0.05)
    assert not is_monotone([1.0, 0.5, 0.6], 0.05)
    assert is_monotone([3.0], 0.05)


def test_loglog_slope_and_surrogate():
    ks = [1, 2, 4, 8]
    assert abs(loglog_slope(ks, [1 / k for k in ks]) + 1.0) < 1e-12
    assert np.isnan(loglog_slope([1, 2], [1.0, float("nan")]))
    X = np.array([[3.0, 4.0], [0.0, 0.0]])
    assert surrogate_C(X, np.array([-2.0, 9.0])) == 5.0


def test_decay_rows_and_bound():
    cfg = small(k_grid=[1, 2, 4], optimizer={"epochs": 5, "restarts": 1})
    rep = decay(cfg)
    assert [r.k for r in rep.rows] == [1, 2, 4]
    for r in rep.rows:
        assert r.bound == pytest.approx(4 * cfg.domain_radius**2 * rep.surrogate_C / r.k)
    with pytest.raises(ValueError):
        decay(small(k_grid=[1, 2]))
