"""Fusion of [a, c, d] into the utterance vector and the classification layer."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import A_DIM, C_DIM, D_DIM, Label, UtteranceVector, make_rng
from .neural.checkpoint import CHECKPOINT_VERSION, decode_tensor, dump_json, encode_tensor, load_checkpoint, model_from_dict, model_to_dict
from .neural.config import TrainConfig
from .neural.losses import softmax
from .neural.mlp import MlpModel, init_mlp, mlp_forward
from .neural.training import train_mlp

STREAMS = ("a", "c", "d")
STREAM_DIMS = {"a": A_DIM, "c": C_DIM, "d": D_DIM}
# Row order of the ablation table: single streams, pairs, then the full combination.
TABLE_MASKS = (("d",), ("a",), ("c",), ("a", "d"), ("c", "d"), ("a", "c"), ("a", "c", "d"))


def parse_mask(value) -> tuple[str, ...]:
    """Accept ``"acd"``, ``"a,c,d"``, ``"[a, d]"`` or an iterable of stream names."""
    if isinstance(value, str):
        letters = [ch for ch in value.lower() if ch.isalpha()]
    else:
        letters = list(value)
    unknown = sorted(set(letters) - set(STREAMS))
    if unknown:
        raise ValueError(f"unknown feature stream(s): {unknown}")
    mask = tuple(s for s in STREAMS if s in letters)
    if not mask:
        raise ValueError("feature mask must be non-empty")
    return mask


def mask_name(mask) -> str:
    return "".join(parse_mask(mask))


def mask_label(mask) -> str:
    mask = parse_mask(mask)
    return mask[0] if len(mask) == 1 else "[" + ", ".join(mask) + "]"


def mask_dim(mask) -> int:
    return sum(STREAM_DIMS[s] for s in parse_mask(mask))


def assemble_vector(a, c, d, mask=STREAMS) -> np.ndarray:
    """Concatenate the masked streams in canonical a, c, d order."""
    parts = {"a": a, "c": c, "d": d}
    out = []
    for s in parse_mask(mask):
        if parts[s] is None:
            raise ValueError(f"stream {s} is required by the mask but missing")
        arr = np.asarray(parts[s], dtype=np.float64)
        if arr.shape != (STREAM_DIMS[s],):
            raise ValueError(f"stream {s} must have {STREAM_DIMS[s]} entries, got shape {arr.shape}")
        out.append(arr)
    return np.concatenate(out)


def _as_vector(vector, mask) -> np.ndarray:
    if isinstance(vector, UtteranceVector):
        return assemble_vector(vector.a, vector.c, vector.d, mask)
    return np.asarray(vector, dtype=np.float64)


@dataclass
class FusionModel:
    mlp: MlpModel
    mask: tuple
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.mask = parse_mask(self.mask)
        dim = mask_dim(self.mask)
        if self.mlp.input_dim != dim or self.mean.shape != (dim,) or self.scale.shape != (dim,):
            raise ValueError(f"fusion model for mask {mask_name(self.mask)} needs input dimension {dim}")

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "kind": "fusion",
            "mask": list(self.mask),
            "normalization": {"mean": encode_tensor(self.mean), "scale": encode_tensor(self.scale)},
            "model": model_to_dict(self.mlp),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FusionModel":
        norm = obj["normalization"]
        return cls(model_from_dict(obj["model"]), tuple(obj["mask"]), decode_tensor(norm["mean"]), decode_tensor(norm["scale"]))


def save_fusion(model: FusionModel, path) -> None:
    dump_json(model.to_dict(), path)


def load_fusion(path) -> FusionModel:
    return FusionModel.from_dict(load_checkpoint(path))


def train_fusion(
    features: Sequence[tuple[UtteranceVector, Label]],
    mask=STREAMS,
    config: Optional[TrainConfig] = None,
    hidden_dims=(64, 64),
) -> FusionModel:
    """z-normalize on the training features, then fit the MLP."""
    if len(features) == 0:
        raise ValueError("training set is empty")
    mask = parse_mask(mask)
    config = config or TrainConfig()
    x = np.stack([_as_vector(v, mask) for v, _ in features])
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    constant = scale < 1e-12
    if np.any(constant):
        warnings.warn(f"constant feature dimension(s) {np.flatnonzero(constant).tolist()}: scale set to 1")
        scale = np.where(constant, 1.0, scale)
    z = (x - mean) / scale
    mlp = init_mlp(x.shape[1], hidden_dims, make_rng(config.seed, 3))
    trained = train_mlp(mlp, [(row, int(label)) for row, (_, label) in zip(z, features)], config).model
    return FusionModel(trained, mask, mean, scale)


def classify(model: FusionModel, vector) -> float:
    """Posterior probability of the device-directed class."""
    x = _as_vector(vector, model.mask)
    if x.shape != model.mean.shape:
        raise ValueError(f"expected a {model.mean.shape[0]}-d vector for mask {mask_name(model.mask)}, got {x.shape}")
    logits = mlp_forward(model.mlp, (x - model.mean) / model.scale)
    return float(softmax(logits)[int(Label.DEVICE_DIRECTED)])


def write_scores(rows, path) -> None:
    """Rows of ``(id, score, label)`` as JSONL."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for uid, score, label in rows:
            fh.write(json.dumps({"id": uid, "label": int(label), "score": float(score)}, sort_keys=True) + "\n")


def read_scores(path) -> list[tuple[str, float, int]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rows.append((obj["id"], float(obj["score"]), int(Label.parse(obj["label"]))))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return rows
