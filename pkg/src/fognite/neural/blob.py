"""Uncompressed model serialization: the FMP1 container.

Layout: 4-byte magic b"FMP1", u32 little-endian header length, a JSON
header describing the config and the tensor manifest (name, shape, offset
in the payload), then all tensors as little-endian float32 in manifest
order. This is the wire format the compression path is measured against.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import ProtocolError
from .model import ModelConfig, ModelParams

MAGIC = b"FMP1"


def _config_to_dict(config: ModelConfig) -> dict:
    return {
        "window": config.window,
        "conv_filters": config.conv_filters,
        "kernel": config.kernel,
        "conv_stride": config.conv_stride,
        "pool_width": config.pool_width,
        "lstm_hidden": config.lstm_hidden,
        "bidirectional": config.bidirectional,
        "dropout_rate": config.dropout_rate,
        "dense": list(config.dense),
    }


def _config_from_dict(data: dict) -> ModelConfig:
    return ModelConfig(
        window=data["window"],
        conv_filters=data["conv_filters"],
        kernel=data["kernel"],
        conv_stride=data["conv_stride"],
        pool_width=data["pool_width"],
        lstm_hidden=data["lstm_hidden"],
        bidirectional=data["bidirectional"],
        dropout_rate=data["dropout_rate"],
        dense=tuple(data["dense"]),
    )


def params_to_bytes(params: ModelParams) -> bytes:
    manifest = []
    payload = bytearray()
    for name, tensor in params.tensors.items():
        manifest.append({"name": name, "shape": list(tensor.shape), "offset": len(payload)})
        payload.extend(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    header = json.dumps(
        {"config": _config_to_dict(params.config), "tensors": manifest},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header)) + header + bytes(payload)


def params_from_bytes(blob: bytes) -> ModelParams:
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise ProtocolError("not an FMP1 model blob")
    (header_len,) = struct.unpack_from("<I", blob, 4)
    header_end = 8 + header_len
    if header_end > len(blob):
        raise ProtocolError("truncated FMP1 header")
    try:
        header = json.loads(blob[8:header_end].decode("utf-8"))
        config = _config_from_dict(header["config"])
        manifest = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"bad FMP1 header: {exc}") from exc
    payload = blob[header_end:]
    tensors: dict[str, np.ndarray] = {}
    for entry in manifest:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise ProtocolError(f"truncated tensor payload at {entry['name']}")
        flat = np.frombuffer(payload, dtype="<f4", count=count, offset=start)
        tensors[entry["name"]] = flat.astype(np.float64).reshape(shape)
    return ModelParams(config=config, tensors=tensors)
