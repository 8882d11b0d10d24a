"""JSON checkpoints: dims, row-major parameter tensors and normalization statistics."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .lstm import LstmLayer, LstmModel
from .mlp import DenseLayer, MlpModel

CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def encode_tensor(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel(order="C")]}


def decode_tensor(obj: dict) -> np.ndarray:
    data = np.array(obj["data"], dtype=np.float64)
    shape = tuple(obj["shape"])
    if data.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError(f"tensor data length {data.size} does not match shape {shape}")
    return data.reshape(shape)


def model_to_dict(model) -> dict:
    if isinstance(model, LstmModel):
        norm = None
        if model.normalization is not None:
            norm = {k: encode_tensor(v) for k, v in sorted(model.normalization.items())}
        return {
            "kind": "lstm",
            "input_dim": model.input_dim,
            "hidden_dims": model.hidden_dims,
            "layers": [
                {"w_x": encode_tensor(l.w_x), "w_h": encode_tensor(l.w_h), "b": encode_tensor(l.b)}
                for l in model.layers
            ],
            "w_out": encode_tensor(model.w_out),
            "b_out": encode_tensor(model.b_out),
            "normalization": norm,
        }
    if isinstance(model, MlpModel):
        return {
            "kind": "mlp",
            "input_dim": model.input_dim,
            "layers": [
                {"w": encode_tensor(l.w), "b": encode_tensor(l.b), "activation": l.activation}
                for l in model.layers
            ],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(obj: dict):
    kind = obj.get("kind")
    if kind == "lstm":
        layers = [LstmLayer(decode_tensor(l["w_x"]), decode_tensor(l["w_h"]), decode_tensor(l["b"])) for l in obj["layers"]]
        norm = obj.get("normalization")
        if norm is not None:
            norm = {k: decode_tensor(v) for k, v in norm.items()}
        model = LstmModel(layers, decode_tensor(obj["w_out"]), decode_tensor(obj["b_out"]), norm)
        if model.input_dim != obj["input_dim"] or model.hidden_dims != list(obj["hidden_dims"]):
            raise CheckpointError("declared dimensions disagree with tensors")
        return model
    if kind == "mlp":
        model = MlpModel([DenseLayer(decode_tensor(l["w"]), decode_tensor(l["b"]), l["activation"]) for l in obj["layers"]])
        if model.input_dim != obj["input_dim"]:
            raise CheckpointError("declared dimensions disagree with tensors")
        return model
    raise CheckpointError(f"unknown model kind {kind!r}")


def dump_json(obj: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def save_model(model, path, **extra) -> None:
    payload = {"version": CHECKPOINT_VERSION, "model": model_to_dict(model), **extra}
    dump_json(payload, path)


def load_checkpoint(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version!r}")
    return payload


def load_model(path):
    return model_from_dict(load_checkpoint(path)["model"])
