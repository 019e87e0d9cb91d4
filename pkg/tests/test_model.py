import numpy as np
import pytest

from fognite.errors import ConfigurationError, ProtocolError, ShapeError, UsageError
from fognite.neural.blob import params_from_bytes, params_to_bytes
from fognite.neural.model import (
    ModelConfig,
    build_model,
    forward,
    loss,
    param_count,
    param_count_for_config,
)

from conftest import random_tiny_config


def test_default_architecture_parameter_count():
    cfg = ModelConfig()
    assert param_count_for_config(cfg) == 74_689
    assert param_count(build_model(cfg, seed=0)) == 74_689


def test_closed_form_count_matches_built_tensors():
    rng = np.random.default_rng(42)
    for _ in range(10):
        cfg = random_tiny_config(rng)
        assert param_count(build_model(cfg, seed=1)) == param_count_for_config(cfg)


def test_tensor_shape_order_is_canonical():
    cfg = ModelConfig(dense=(5, 3), bidirectional=True)
    names = list(cfg.tensor_shapes())
    assert names == [
        "conv.w", "conv.b",
        "lstm_fw.wx", "lstm_fw.wh", "lstm_fw.b",
        "lstm_bw.wx", "lstm_bw.wh", "lstm_bw.b",
        "dense0.w", "dense0.b", "dense1.w", "dense1.b",
        "out.w", "out.b",
    ]
    uni = ModelConfig(bidirectional=False)
    assert "lstm_bw.wx" not in uni.tensor_shapes()


def test_build_is_seeded_and_bounded():
    cfg = ModelConfig(window=12, conv_filters=3, kernel=3, lstm_hidden=4, dense=(5,))
    a = build_model(cfg, seed=3)
    b = build_model(cfg, seed=3)
    c = build_model(cfg, seed=4)
    for name in a.tensors:
        assert np.array_equal(a.tensors[name], b.tensors[name])
    assert any(not np.array_equal(a.tensors[n], c.tensors[n]) for n in a.tensors)
    # init bound: |w| <= 1/sqrt(fan_in)
    w = a.tensors["dense0.w"]
    assert np.abs(w).max() <= 1.0 / np.sqrt(w.shape[1])


def test_config_validation():
    assert ModelConfig().validate() == []
    bad = ModelConfig(window=4, kernel=5)
    assert any("kernel" in p for p in bad.validate())
    with pytest.raises(ConfigurationError):
        build_model(ModelConfig(dropout_rate=1.0), seed=0)


def test_forward_shapes_and_modes(tiny_model):
    w = tiny_model.config.window
    x1 = np.linspace(0, 1, w)
    pred, cache = forward(tiny_model, x1)
    assert isinstance(pred, float) and cache is None
    batch = np.tile(x1, (4, 1))
    preds, cache = forward(tiny_model, batch, mode="train", dropout_seed=9)
    assert preds.shape == (4,) and cache is not None
    with pytest.raises(ShapeError):
        forward(tiny_model, np.zeros(w + 1))
    with pytest.raises(UsageError):
        forward(tiny_model, x1, mode="predict")


def test_eval_forward_is_deterministic_and_dropout_free(tiny_model):
    x = np.random.default_rng(0).random((3, tiny_model.config.window))
    a, _ = forward(tiny_model, x)
    b, _ = forward(tiny_model, x)
    assert np.array_equal(a, b)


def test_train_dropout_is_seeded(tiny_model):
    x = np.random.default_rng(0).random((3, tiny_model.config.window))
    a, _ = forward(tiny_model, x, mode="train", dropout_seed=1)
    b, _ = forward(tiny_model, x, mode="train", dropout_seed=1)
    c, _ = forward(tiny_model, x, mode="train", dropout_seed=2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_loss_is_mse_plus_penalty(tiny_model):
    preds = np.array([1.0, 2.0])
    targs = np.array([0.0, 4.0])
    assert loss(preds, targs, tiny_model) == pytest.approx(2.5)
    sq = sum(float(np.sum(t * t)) for t in tiny_model.tensors.values())
    assert loss(preds, targs, tiny_model, lam=0.1) == pytest.approx(2.5 + 0.1 * sq)
    with pytest.raises(ShapeError):
        loss(np.zeros(2), np.zeros(3), tiny_model)


def test_blob_round_trip_is_float32_exact(tiny_model):
    data = params_to_bytes(tiny_model)
    back = params_from_bytes(data)
    assert back.config == tiny_model.config
    for name, tensor in tiny_model.tensors.items():
        assert np.array_equal(back.tensors[name], tensor.astype(np.float32).astype(np.float64))


def test_blob_rejects_corruption(tiny_model):
    data = params_to_bytes(tiny_model)
    with pytest.raises(ProtocolError):
        params_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ProtocolError):
        params_from_bytes(data[: len(data) - 5])
    with pytest.raises(ProtocolError):
        params_from_bytes(data[:6])
