"""Shared test fixtures and oracles."""

from __future__ import annotations

import numpy as np
import pytest

from fognite.neural.model import ModelConfig, build_model, forward, loss

# one line per acceptance check, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_tiny_config(rng: np.random.Generator) -> ModelConfig:
    """A small random architecture that still exercises every layer."""
    window = int(rng.integers(6, 12))
    kernel = int(rng.integers(2, min(4, window) + 1))
    return ModelConfig(
        window=window,
        conv_filters=int(rng.integers(1, 4)),
        kernel=kernel,
        pool_width=int(rng.integers(1, 3)),
        lstm_hidden=int(rng.integers(2, 5)),
        bidirectional=bool(rng.integers(0, 2)),
        dropout_rate=float(rng.choice([0.0, 0.2, 0.4])),
        dense=tuple(int(rng.integers(2, 6)) for _ in range(int(rng.integers(1, 3)))),
    )


def finite_difference_grads(params, x, y, lam=0.0, dropout_seed=0, h=5e-4):
    """Five-point central-difference gradient of the training loss.

    The same dropout seed is used for every probe so the perturbed losses
    are evaluations of one fixed, deterministic function. The fourth-order
    stencil lets h stay large enough that subtractive cancellation (around
    1e-12 on the derivative for O(1) losses) stays far below the 1e-4
    relative bar without truncation error taking over.
    """
    grads = {}

    def probe(flat, i, step):
        orig = flat[i]
        flat[i] = orig + step
        preds, _ = forward(params, x, mode="train", dropout_seed=dropout_seed)
        value = loss(preds, y, params, lam)
        flat[i] = orig
        return value

    for name, tensor in params.tensors.items():
        g = np.zeros_like(tensor)
        flat = tensor.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            f1 = probe(flat, i, 2.0 * h)
            f2 = probe(flat, i, h)
            f3 = probe(flat, i, -h)
            f4 = probe(flat, i, -2.0 * h)
            gflat[i] = (-f1 + 8.0 * f2 - 8.0 * f3 + f4) / (12.0 * h)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict, numeric: dict) -> float:
    # the 1e-6 floor turns the check absolute (1e-10) for near-zero
    # coordinates, where finite differences are noise-limited
    worst = 0.0
    for name in analytic:
        a = analytic[name].ravel()
        n = numeric[name].ravel()
        scale = np.maximum(np.abs(a) + np.abs(n), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / scale)))
    return worst


@pytest.fixture
def tiny_model():
    cfg = ModelConfig(
        window=8,
        conv_filters=2,
        kernel=3,
        pool_width=2,
        lstm_hidden=3,
        bidirectional=True,
        dropout_rate=0.25,
        dense=(4,),
    )
    return build_model(cfg, seed=7)
