"""The CNN-LSTM load forecaster.

Pipeline: 1-d convolution over the input window (valid padding, stride 1,
no activation) -> max pooling -> bidirectional LSTM (the final hidden state
of each direction, concatenated) -> dropout -> ReLU dense stack -> one
linear output unit.

Training minimizes mean squared error plus an L2 penalty on all weights:
mean((y - f(x))^2) + lam * sum(theta^2). ``backward`` produces the exact
gradient of that objective for every tensor, which keeps the whole model
checkable against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, InvalidInputError, ShapeError, UsageError
from . import layers


@dataclass
class ModelConfig:
    """Architecture knobs. Defaults give the full-size forecaster."""

    window: int = 96
    conv_filters: int = 32
    kernel: int = 5
    conv_stride: int = 1
    pool_width: int = 2
    lstm_hidden: int = 64
    bidirectional: bool = True
    dropout_rate: float = 0.3
    dense: tuple[int, ...] = (128, 64)

    def validate(self) -> list[str]:
        problems = []
        if self.window < 1:
            problems.append("window must be >= 1")
        if self.conv_filters < 1 or self.kernel < 1 or self.lstm_hidden < 1:
            problems.append("layer sizes must be >= 1")
        if self.conv_stride != 1:
            problems.append("only conv_stride = 1 is supported")
        if self.pool_width < 1:
            problems.append("pool_width must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append("dropout_rate must lie in [0, 1)")
        if any(d < 1 for d in self.dense):
            problems.append("dense sizes must be >= 1")
        if self.kernel > self.window:
            problems.append("kernel cannot exceed window")
        elif self.pooled_steps < 1:
            problems.append("window too short: pooling leaves no timesteps")
        return problems

    @property
    def conv_out_len(self) -> int:
        return self.window - self.kernel + 1

    @property
    def pooled_steps(self) -> int:
        return self.conv_out_len // self.pool_width

    @property
    def lstm_out_dim(self) -> int:
        return self.lstm_hidden * (2 if self.bidirectional else 1)

    def tensor_shapes(self) -> dict[str, tuple[int, ...]]:
        """Tensor name -> shape, in canonical order."""
        f, k, h = self.conv_filters, self.kernel, self.lstm_hidden
        shapes: dict[str, tuple[int, ...]] = {
            "conv.w": (f, k),
            "conv.b": (f,),
        }
        directions = ["lstm_fw", "lstm_bw"] if self.bidirectional else ["lstm_fw"]
        for name in directions:
            shapes[f"{name}.wx"] = (4 * h, f)
            shapes[f"{name}.wh"] = (4 * h, h)
            shapes[f"{name}.b"] = (4 * h,)
        prev = self.lstm_out_dim
        for i, width in enumerate(self.dense):
            shapes[f"dense{i}.w"] = (width, prev)
            shapes[f"dense{i}.b"] = (width,)
            prev = width
        shapes["out.w"] = (1, prev)
        shapes["out.b"] = (1,)
        return shapes


@dataclass
class ModelParams:
    """Named parameter tensors plus the config they were built for."""

    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def compatible_with(self, other: "ModelParams") -> bool:
        if self.tensors.keys() != other.tensors.keys():
            return False
        return all(self.tensors[k].shape == other.tensors[k].shape for k in self.tensors)


@dataclass
class ModelCache:
    """Activations saved by a train-mode forward pass for ``backward``."""

    x: np.ndarray
    conv: tuple
    pool: tuple
    lstm_fw: tuple
    lstm_bw: tuple | None
    dropout_mask: np.ndarray | None
    dense: list[tuple]          # (x_in, relu_mask) per hidden dense layer
    out_in: np.ndarray
    pred: np.ndarray


def _fan_in(name: str, shape: tuple[int, ...], config: ModelConfig) -> int:
    """Initialization fan-in per tensor; biases use their layer's input width."""
    if name.endswith(".w") or name.endswith(".wx") or name.endswith(".wh"):
        return shape[-1]
    if name.startswith("conv."):
        return config.kernel
    if name.startswith("lstm_"):
        return config.conv_filters
    # dense/out biases
    stem = name.rsplit(".", 1)[0]
    return config.tensor_shapes()[f"{stem}.w"][-1]


def build_model(config: ModelConfig, seed: int) -> ModelParams:
    """Seeded uniform init: every tensor ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in))."""
    problems = config.validate()
    if problems:
        raise ConfigurationError(problems)
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in config.tensor_shapes().items():
        bound = 1.0 / np.sqrt(_fan_in(name, shape, config))
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(config=config, tensors=tensors)


def param_count(params: ModelParams) -> int:
    return int(sum(t.size for t in params.tensors.values()))


def param_count_for_config(config: ModelConfig) -> int:
    """Closed-form count (conv + gates + dense chain), cross-checked in tests."""
    f, k, h = config.conv_filters, config.kernel, config.lstm_hidden
    directions = 2 if config.bidirectional else 1
    count = f * k + f
    count += directions * (4 * h * f + 4 * h * h + 4 * h)
    prev = config.lstm_out_dim
    for width in config.dense:
        count += width * prev + width
        prev = width
    count += prev + 1
    return count


def forward(
    params: ModelParams,
    x: np.ndarray,
    mode: str = "eval",
    dropout_seed: int = 0,
) -> tuple[np.ndarray | float, ModelCache | None]:
    """Run the forecaster on one window or a batch of windows.

    Eval mode disables dropout and returns no cache; train mode applies the
    seeded dropout mask and caches activations for ``backward``. A 1-d
    input yields a scalar prediction, a (B, W) batch yields shape (B,).
    """
    if mode not in ("train", "eval"):
        raise UsageError(f"unknown forward mode {mode!r}")
    cfg = params.config
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != cfg.window:
        raise ShapeError(f"expected input window of length {cfg.window}, got {arr.shape}")

    t = params.tensors
    conv_out, conv_cache = layers.conv1d_forward(arr, t["conv.w"], t["conv.b"])
    pooled, pool_cache = layers.maxpool_forward(conv_out, cfg.pool_width)
    seq = pooled.transpose(0, 2, 1)                     # (B, T, F)

    h_fw, fw_cache = layers.lstm_forward(seq, t["lstm_fw.wx"], t["lstm_fw.wh"], t["lstm_fw.b"])
    if cfg.bidirectional:
        h_bw, bw_cache = layers.lstm_forward(
            seq[:, ::-1, :], t["lstm_bw.wx"], t["lstm_bw.wh"], t["lstm_bw.b"]
        )
        feat = np.concatenate([h_fw, h_bw], axis=1)
    else:
        bw_cache = None
        feat = h_fw

    if mode == "train" and cfg.dropout_rate > 0.0:
        rng = np.random.default_rng(dropout_seed)
        feat, drop_mask = layers.dropout_forward(feat, cfg.dropout_rate, rng)
    else:
        drop_mask = None

    dense_cache: list[tuple] = []
    h = feat
    for i in range(len(cfg.dense)):
        z, x_in = layers.dense_forward(h, t[f"dense{i}.w"], t[f"dense{i}.b"])
        h, relu_mask = layers.relu_forward(z)
        dense_cache.append((x_in, relu_mask))
    pred, out_in = layers.dense_forward(h, t["out.w"], t["out.b"])
    pred = pred[:, 0]

    cache = None
    if mode == "train":
        cache = ModelCache(
            x=arr,
            conv=conv_cache,
            pool=pool_cache,
            lstm_fw=fw_cache,
            lstm_bw=bw_cache,
            dropout_mask=drop_mask,
            dense=dense_cache,
            out_in=out_in,
            pred=pred,
        )
    if single:
        return float(pred[0]), cache
    return pred, cache


def loss(
    predictions: np.ndarray,
    targets: np.ndarray,
    params: ModelParams,
    lam: float = 0.0,
) -> float:
    """Mean squared error plus lam * sum of squared parameters."""
    preds = np.atleast_1d(np.asarray(predictions, dtype=np.float64))
    targs = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    if preds.shape != targs.shape:
        raise ShapeError(f"predictions {preds.shape} vs targets {targs.shape}")
    if preds.size == 0:
        raise InvalidInputError("loss needs at least one prediction")
    mse = float(np.mean((targs - preds) ** 2))
    reg = 0.0
    if lam != 0.0:
        reg = lam * float(sum(np.sum(t * t) for t in params.tensors.values()))
    return mse + reg


def backward(
    params: ModelParams,
    cache: ModelCache | None,
    targets: np.ndarray,
    lam: float = 0.0,
) -> dict[str, np.ndarray]:
    """Gradient of the training loss w.r.t. every parameter tensor."""
    if cache is None:
        raise UsageError("backward needs the cache from a train-mode forward pass")
    cfg = params.config
    t = params.tensors
    targs = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    batch = cache.pred.shape[0]
    if targs.shape != cache.pred.shape:
        raise ShapeError(f"targets {targs.shape} vs predictions {cache.pred.shape}")

    grads: dict[str, np.ndarray] = {}

    # d(mse)/d(pred) for mean over the batch
    dpred = (2.0 / batch) * (cache.pred - targs)
    dy = dpred[:, None]

    dh, grads["out.w"], grads["out.b"] = layers.dense_backward(dy, cache.out_in, t["out.w"])
    for i in range(len(cfg.dense) - 1, -1, -1):
        x_in, relu_mask = cache.dense[i]
        dz = layers.relu_backward(dh, relu_mask)
        dh, grads[f"dense{i}.w"], grads[f"dense{i}.b"] = layers.dense_backward(
            dz, x_in, t[f"dense{i}.w"]
        )

    dfeat = layers.dropout_backward(dh, cache.dropout_mask)

    if cfg.bidirectional:
        hidden = cfg.lstm_hidden
        dh_fw, dh_bw = dfeat[:, :hidden], dfeat[:, hidden:]
    else:
        dh_fw, dh_bw = dfeat, None

    dseq, grads["lstm_fw.wx"], grads["lstm_fw.wh"], grads["lstm_fw.b"] = layers.lstm_backward(
        dh_fw, cache.lstm_fw, t["lstm_fw.wx"], t["lstm_fw.wh"]
    )
    if cfg.bidirectional:
        dseq_bw, grads["lstm_bw.wx"], grads["lstm_bw.wh"], grads["lstm_bw.b"] = layers.lstm_backward(
            dh_bw, cache.lstm_bw, t["lstm_bw.wx"], t["lstm_bw.wh"]
        )
        dseq = dseq + dseq_bw[:, ::-1, :]

    dpool = dseq.transpose(0, 2, 1)
    dconv = layers.maxpool_backward(dpool, cache.pool)
    _, grads["conv.w"], grads["conv.b"] = layers.conv1d_backward(dconv, cache.conv, t["conv.w"])

    if lam != 0.0:
        for name in grads:
            grads[name] = grads[name] + 2.0 * lam * t[name]

    # return in canonical tensor order
    return {name: grads[name] for name in t}
