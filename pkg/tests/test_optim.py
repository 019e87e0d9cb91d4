import numpy as np
import pytest

from fognite.errors import ShapeError
from fognite.neural.optim import AdamConfig, OptimizerState, adam_step


def reference_adam(tensors, grad_seq, cfg):
    """Straightforward reimplementation used as the oracle."""
    m = {k: np.zeros_like(v) for k, v in tensors.items()}
    v = {k: np.zeros_like(t) for k, t in tensors.items()}
    out = {k: t.copy() for k, t in tensors.items()}
    for t, grads in enumerate(grad_seq, start=1):
        for name in out:
            g = grads[name]
            m[name] = cfg.beta1 * m[name] + (1 - cfg.beta1) * g
            v[name] = cfg.beta2 * v[name] + (1 - cfg.beta2) * g**2
            m_hat = m[name] / (1 - cfg.beta1**t)
            v_hat = v[name] / (1 - cfg.beta2**t)
            out[name] = out[name] - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return out


def test_multi_step_matches_reference():
    rng = np.random.default_rng(5)
    tensors = {"w": rng.standard_normal((3, 2)), "b": rng.standard_normal(2)}
    grad_seq = [
        {k: rng.standard_normal(t.shape) for k, t in tensors.items()} for _ in range(7)
    ]
    cfg = AdamConfig(lr=0.01)
    state = OptimizerState(config=cfg)
    current = tensors
    for grads in grad_seq:
        current = adam_step(current, grads, state)
    expected = reference_adam(tensors, grad_seq, cfg)
    for name in tensors:
        assert np.allclose(current[name], expected[name], rtol=0, atol=1e-15)
    assert state.step == 7


def test_zero_gradient_is_exact_identity():
    tensors = {"w": np.array([1.0, -2.0, 3.0])}
    state = OptimizerState()
    out = adam_step(tensors, {"w": np.zeros(3)}, state)
    assert np.array_equal(out["w"], tensors["w"])


def test_first_step_size_is_lr_times_sign():
    # with m = v = 0 the bias-corrected first step is lr * g / (|g| + eps)
    tensors = {"w": np.zeros(2)}
    grads = {"w": np.array([0.5, -3.0])}
    out = adam_step(tensors, grads, OptimizerState(config=AdamConfig(lr=0.1)))
    assert np.allclose(out["w"], [-0.1, 0.1], atol=1e-8)


def test_shape_and_name_validation():
    state = OptimizerState()
    with pytest.raises(ShapeError):
        adam_step({"w": np.zeros(2)}, {"b": np.zeros(2)}, state)
    with pytest.raises(ShapeError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, state)
