"""Minimal tensor kernels and the CNN-LSTM forecaster.

Everything is plain float64 numpy with hand-derived gradients for exactly
this architecture; there is no general autodiff and no accelerator path.
"""

from .model import (
    ModelConfig,
    ModelParams,
    build_model,
    forward,
    backward,
    loss,
    param_count,
    param_count_for_config,
)
from .optim import OptimizerState, adam_step
from .blob import params_to_bytes, params_from_bytes

__all__ = [
    "ModelConfig",
    "ModelParams",
    "build_model",
    "forward",
    "backward",
    "loss",
    "param_count",
    "param_count_for_config",
    "OptimizerState",
    "adam_step",
    "params_to_bytes",
    "params_from_bytes",
]
