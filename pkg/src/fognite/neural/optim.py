"""Adam with bias correction, operating on the named-tensor dicts.

State carries first and second moment estimates per tensor plus the step
counter. A zero gradient leaves a fresh optimizer's parameters exactly
unchanged (the update is m_hat / (sqrt(v_hat) + eps) with m = v = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class OptimizerState:
    config: AdamConfig = field(default_factory=AdamConfig)
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    tensors: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
) -> dict[str, np.ndarray]:
    """One Adam update. Mutates ``state``, returns the new tensor dict."""
    if grads.keys() != tensors.keys():
        missing = sorted(set(tensors) ^ set(grads))
        raise ShapeError(f"gradient/tensor name mismatch: {missing}")
    cfg = state.config
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    updated: dict[str, np.ndarray] = {}
    for name, theta in tensors.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeError(f"{name}: grad {g.shape} vs tensor {theta.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / bc1
        v_hat = v / bc2
        updated[name] = theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return updated
