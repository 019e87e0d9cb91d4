"""Federated training of the forecaster across fog nodes.

Each node trains the shared CNN-LSTM on its own meter data; only model
parameters ever cross the node boundary. The coordinator merges updates
with data-volume weighting:

    w_{t+1} = w_t + sum_k (n_k / N) * (w_k - w_t),   N = sum_k n_k

and pushes the merged model back out every ``sync_interval`` rounds.
Updates travel pruned (small magnitudes zeroed) and 8-bit quantized; the
wire format is measured against the uncompressed float blob.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ProtocolError
from .neural import blob as nblob
from .neural.model import ModelConfig, ModelParams, backward, forward, loss
from .neural.optim import AdamConfig, OptimizerState, adam_step

QUANT_MAGIC = b"FQB1"


@dataclass
class LocalUpdate:
    """One node's trained parameters plus its sample count n_k."""

    node_id: str
    new_params: ModelParams
    sample_count: int


@dataclass
class CompressionConfig:
    quant_bits: int = 8
    prune_threshold: float = 0.001

    def validate(self) -> list[str]:
        problems = []
        if self.quant_bits != 8:
            problems.append("quant_bits must be 8")
        if self.prune_threshold < 0:
            problems.append("prune_threshold must be >= 0")
        return problems


@dataclass
class QuantizedTensor:
    name: str
    shape: tuple[int, ...]
    vmin: float
    scale: float
    codes: np.ndarray           # flat uint8


@dataclass
class QuantizedBlob:
    config: ModelConfig
    tensors: list[QuantizedTensor]
    round_index: int = 0
    node_id: str = ""


@dataclass
class RoundState:
    """Coordinator view of the protocol between rounds.

    ``node_params`` holds what each node would train from next round: its
    own last update between syncs, the fresh global copy right after one.
    """

    global_params: ModelParams
    round_index: int = 0
    sync_interval: int = 5
    epochs_per_round: int = 5
    batch_size: int = 32
    l2_penalty: float = 1e-5
    node_params: dict[str, ModelParams] = field(default_factory=dict)
    optimizer_states: dict[str, OptimizerState] = field(default_factory=dict)
    rebroadcasts: int = 0

    def validate(self) -> list[str]:
        problems = []
        if self.round_index < 0:
            problems.append("round_index must be >= 0")
        for name in ("sync_interval", "epochs_per_round", "batch_size"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.l2_penalty < 0:
            problems.append("l2_penalty must be >= 0")
        return problems


@dataclass
class PayloadRecord:
    """One transmission: what kind of payload crossed and how big it was."""

    kind: str                   # "model_blob" or "quantized_blob"
    direction: str              # "up" or "down"
    node_id: str
    nbytes: int


@dataclass
class RoundLog:
    round_index: int
    participants: list[str]
    skipped: list[str]
    sample_counts: dict[str, int]
    payloads: list[PayloadRecord]
    rebroadcast: bool
    note: str = ""

    @property
    def bytes_up(self) -> int:
        return sum(p.nbytes for p in self.payloads if p.direction == "up")


def local_train(
    global_params: ModelParams,
    windows: np.ndarray,
    targets: np.ndarray,
    epochs: int,
    batch_size: int,
    seed: int,
    node_id: str = "node",
    lam: float = 0.0,
    adam: AdamConfig | None = None,
    opt_state: OptimizerState | None = None,
) -> LocalUpdate:
    """Mini-batch Adam on a copy of the global model. 0 epochs is identity."""
    x = np.asarray(windows, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidInputError("local_train needs a non-empty (n, window) array")
    if y.shape != (x.shape[0],):
        raise InvalidInputError(f"targets shape {y.shape} does not match {x.shape[0]} windows")
    if epochs < 0 or batch_size < 1:
        raise InvalidInputError("epochs must be >= 0 and batch_size >= 1")

    params = global_params.copy()
    state = opt_state if opt_state is not None else OptimizerState(adam or AdamConfig())
    rng = np.random.default_rng(seed)
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            drop_seed = int(rng.integers(0, 2**31))
            preds, cache = forward(params, x[idx], mode="train", dropout_seed=drop_seed)
            grads = backward(params, cache, y[idx], lam=lam)
            params.tensors = adam_step(params.tensors, grads, state)
    return LocalUpdate(node_id=node_id, new_params=params, sample_count=n)


def fedavg_aggregate(w_t: ModelParams, updates: list[LocalUpdate]) -> ModelParams:
    """Data-volume-weighted merge; an empty update list leaves w_t as is."""
    if not updates:
        return w_t.copy()
    for u in updates:
        if u.sample_count < 1:
            raise InvalidInputError(f"{u.node_id}: sample_count must be >= 1")
        if not w_t.compatible_with(u.new_params):
            raise ProtocolError(f"{u.node_id}: update shape-incompatible with global model")
    if len(updates) == 1:
        # w + 1.0*(u - w) picks up rounding; a lone participant must pass through bit-exact
        return updates[0].new_params.copy()
    total = float(sum(u.sample_count for u in updates))
    merged: dict[str, np.ndarray] = {}
    for name, w in w_t.tensors.items():
        delta = np.zeros_like(w)
        for u in updates:
            delta += (u.sample_count / total) * (u.new_params.tensors[name] - w)
        merged[name] = w + delta
    return ModelParams(config=w_t.config, tensors=merged)


def prune(params: ModelParams, threshold: float) -> ModelParams:
    """Zero every entry with |v| strictly below threshold."""
    if threshold < 0:
        raise InvalidInputError("prune threshold must be >= 0")
    out = params.copy()
    for tensor in out.tensors.values():
        tensor[np.abs(tensor) < threshold] = 0.0
    return out


def quantize8(params: ModelParams, round_index: int = 0, node_id: str = "") -> QuantizedBlob:
    """Per-tensor affine 8-bit: scale = (max-min)/255, code = round((v-min)/scale)."""
    tensors = []
    for name, tensor in params.tensors.items():
        if not np.all(np.isfinite(tensor)):
            raise InvalidInputError(f"{name}: quantization needs finite values")
        vmin = float(tensor.min())
        vmax = float(tensor.max())
        scale = (vmax - vmin) / 255.0
        if scale == 0.0:
            codes = np.zeros(tensor.size, dtype=np.uint8)
        else:
            codes = np.round((tensor.ravel() - vmin) / scale).astype(np.uint8)
        tensors.append(
            QuantizedTensor(name=name, shape=tensor.shape, vmin=vmin, scale=scale, codes=codes)
        )
    return QuantizedBlob(
        config=params.config, tensors=tensors, round_index=round_index, node_id=node_id
    )


def dequantize(blob: QuantizedBlob) -> ModelParams:
    tensors = {
        qt.name: (qt.vmin + qt.codes.astype(np.float64) * qt.scale).reshape(qt.shape)
        for qt in blob.tensors
    }
    return ModelParams(config=blob.config, tensors=tensors)


def blob_to_bytes(blob: QuantizedBlob) -> bytes:
    """FQB1 container: JSON header + the code stream, deflated when smaller.

    The raw fallback caps the payload at one byte per parameter, so the
    container never exceeds a quarter of the float32 payload it replaces.
    """
    raw = b"".join(qt.codes.tobytes() for qt in blob.tensors)
    deflated = zlib.compress(raw, level=9)
    encoding, payload = ("deflate", deflated) if len(deflated) < len(raw) else ("raw", raw)
    manifest = []
    offset = 0
    for qt in blob.tensors:
        manifest.append(
            {
                "name": qt.name,
                "shape": list(qt.shape),
                "min": qt.vmin,
                "scale": qt.scale,
                "offset": offset,
                "count": int(qt.codes.size),
            }
        )
        offset += qt.codes.size
    header = json.dumps(
        {
            "round": blob.round_index,
            "node": blob.node_id,
            "encoding": encoding,
            "config": nblob._config_to_dict(blob.config),
            "tensors": manifest,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return QUANT_MAGIC + struct.pack("<I", len(header)) + header + payload


def blob_from_bytes(data: bytes) -> QuantizedBlob:
    if len(data) < 8 or data[:4] != QUANT_MAGIC:
        raise ProtocolError("not an FQB1 quantized blob")
    (header_len,) = struct.unpack_from("<I", data, 4)
    header_end = 8 + header_len
    if header_end > len(data):
        raise ProtocolError("truncated FQB1 header")
    try:
        header = json.loads(data[8:header_end].decode("utf-8"))
        config = nblob._config_from_dict(header["config"])
        encoding = header["encoding"]
        manifest = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"bad FQB1 header: {exc}") from exc
    payload = data[header_end:]
    if encoding == "deflate":
        try:
            payload = zlib.decompress(payload)
        except zlib.error as exc:
            raise ProtocolError(f"bad FQB1 payload: {exc}") from exc
    elif encoding != "raw":
        raise ProtocolError(f"unknown FQB1 encoding {encoding!r}")
    tensors = []
    for entry in manifest:
        start, count = entry["offset"], entry["count"]
        if start + count > len(payload):
            raise ProtocolError(f"truncated codes at {entry['name']}")
        codes = np.frombuffer(payload, dtype=np.uint8, count=count, offset=start)
        tensors.append(
            QuantizedTensor(
                name=entry["name"],
                shape=tuple(entry["shape"]),
                vmin=entry["min"],
                scale=entry["scale"],
                codes=codes,
            )
        )
    return QuantizedBlob(
        config=config,
        tensors=tensors,
        round_index=header["round"],
        node_id=header["node"],
    )


def compression_ratio(params: ModelParams, compression: CompressionConfig) -> float:
    """Serialized float blob size over serialized pruned+quantized size."""
    raw = len(nblob.params_to_bytes(params))
    packed = len(blob_to_bytes(quantize8(prune(params, compression.prune_threshold))))
    return raw / packed


def run_round(
    state: RoundState,
    datasets: dict[str, tuple[np.ndarray, np.ndarray]],
    compression: CompressionConfig | None,
    seed: int,
    adam: AdamConfig | None = None,
    persist_optimizer: bool = False,
) -> tuple[RoundState, RoundLog]:
    """One protocol round: train, ship updates, merge, maybe rebroadcast.

    ``datasets`` maps node id to (windows, targets); nodes with no rows are
    skipped and reported. With ``compression`` set, updates cross as FQB1
    bytes and the dequantized values are what gets aggregated; with None
    they cross as float blobs and aggregation sees the exact trained
    values. No round runs if nobody can participate.
    """
    order = sorted(datasets)
    participants = [nid for nid in order if datasets[nid][0] is not None and len(datasets[nid][0])]
    skipped = [nid for nid in order if nid not in participants]
    if not participants:
        return state, RoundLog(
            round_index=state.round_index,
            participants=[],
            skipped=skipped,
            sample_counts={},
            payloads=[],
            rebroadcast=False,
            note="round skipped: no node had data",
        )

    seed_root = np.random.SeedSequence(entropy=[seed, state.round_index])
    children = seed_root.spawn(len(participants))
    payloads: list[PayloadRecord] = []
    updates: list[LocalUpdate] = []
    sample_counts: dict[str, int] = {}

    node_params = dict(state.node_params)
    optimizer_states = dict(state.optimizer_states)
    for nid, child in zip(participants, children):
        windows, targets = datasets[nid]
        start_params = node_params.get(nid, state.global_params)
        opt = None
        if persist_optimizer:
            opt = optimizer_states.setdefault(nid, OptimizerState(adam or AdamConfig()))
        update = local_train(
            start_params,
            windows,
            targets,
            epochs=state.epochs_per_round,
            batch_size=state.batch_size,
            seed=int(child.generate_state(1)[0]),
            node_id=nid,
            lam=state.l2_penalty,
            adam=adam,
            opt_state=opt,
        )
        sample_counts[nid] = update.sample_count
        if compression is not None:
            wire = blob_to_bytes(
                quantize8(
                    prune(update.new_params, compression.prune_threshold),
                    round_index=state.round_index,
                    node_id=nid,
                )
            )
            payloads.append(PayloadRecord("quantized_blob", "up", nid, len(wire)))
            received = dequantize(blob_from_bytes(wire))
            node_params[nid] = update.new_params
            updates.append(LocalUpdate(nid, received, update.sample_count))
        else:
            nbytes = len(nblob.params_to_bytes(update.new_params))
            payloads.append(PayloadRecord("model_blob", "up", nid, nbytes))
            node_params[nid] = update.new_params
            updates.append(update)

    new_global = fedavg_aggregate(state.global_params, updates)
    next_round = state.round_index + 1
    rebroadcast = next_round % state.sync_interval == 0
    if rebroadcast:
        down_bytes = len(nblob.params_to_bytes(new_global))
        for nid in participants:
            node_params[nid] = new_global.copy()
            payloads.append(PayloadRecord("model_blob", "down", nid, down_bytes))

    new_state = RoundState(
        global_params=new_global,
        round_index=next_round,
        sync_interval=state.sync_interval,
        epochs_per_round=state.epochs_per_round,
        batch_size=state.batch_size,
        l2_penalty=state.l2_penalty,
        node_params=node_params,
        optimizer_states=optimizer_states,
        rebroadcasts=state.rebroadcasts + (1 if rebroadcast else 0),
    )
    log = RoundLog(
        round_index=state.round_index,
        participants=participants,
        skipped=skipped,
        sample_counts=sample_counts,
        payloads=payloads,
        rebroadcast=rebroadcast,
    )
    return new_state, log
