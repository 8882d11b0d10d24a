"""Plain SGD training loops for the sequence and feed-forward models."""

from __future__ import annotations

import logging
from typing import NamedTuple, Sequence

import numpy as np

from ..core import make_rng
from . import lstm, mlp
from .config import TrainConfig

log = logging.getLogger(__name__)


class TrainResult(NamedTuple):
    model: object
    epoch_losses: list[float]
    skipped: int = 0


def clip_by_global_norm(grads: list[np.ndarray], max_norm: float | None) -> list[np.ndarray]:
    if max_norm is None:
        return grads
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads]
    return grads


def sgd_step(params: list[np.ndarray], grads: list[np.ndarray], config: TrainConfig) -> None:
    for p, g in zip(params, clip_by_global_norm(grads, config.grad_clip)):
        p -= config.learning_rate * g


def _batches(n: int, config: TrainConfig, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, config.batch_size):
        yield order[start : start + config.batch_size]


def train_sequence_model(
    model: lstm.LstmModel,
    dataset: Sequence[tuple[np.ndarray, int]],
    config: TrainConfig,
    normalize: bool = True,
) -> TrainResult:
    """Train with framewise targets (utterance label repeated per frame) via BPTT and SGD.

    Sequences are normalized with ``model.normalization`` when present and ``normalize`` is set.
    Empty sequences are skipped and counted in ``TrainResult.skipped``.
    """
    model = model.copy()
    seqs, labels = [], []
    skipped = 0
    for seq, label in dataset:
        seq = np.asarray(seq, dtype=np.float64)
        if seq.ndim != 2 or seq.shape[0] == 0:
            skipped += 1
            continue
        seqs.append(model.normalize(seq) if normalize else seq)
        labels.append(int(label))
    if skipped:
        log.warning("skipped %d empty sequences", skipped)
    if not seqs:
        raise ValueError("dataset contains no non-empty sequences")
    rng = make_rng(config.seed, 1)
    params = model.params()
    losses = []
    for epoch in range(config.epochs):
        total = 0.0
        for idx in _batches(len(seqs), config, rng):
            loss, grads = lstm.batch_loss_and_grads(model, [seqs[i] for i in idx], [labels[i] for i in idx])
            total += loss * len(idx)
            sgd_step(params, grads, config)
        losses.append(total / len(seqs))
        log.info("epoch %d mean loss %.5f", epoch + 1, losses[-1])
    return TrainResult(model, losses, skipped)


def train_mlp(model: mlp.MlpModel, dataset: Sequence[tuple[np.ndarray, int]], config: TrainConfig) -> TrainResult:
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    model = model.copy()
    x = np.stack([np.asarray(v, dtype=np.float64) for v, _ in dataset])
    y = np.array([int(label) for _, label in dataset])
    rng = make_rng(config.seed, 2)
    params = model.params()
    losses = []
    for epoch in range(config.epochs):
        total = 0.0
        for idx in _batches(len(y), config, rng):
            loss, grads = mlp.batch_loss_and_grads(model, x[idx], y[idx])
            total += loss * len(idx)
            sgd_step(params, grads, config)
        losses.append(total / len(y))
        log.debug("epoch %d mean loss %.5f", epoch + 1, losses[-1])
    return TrainResult(model, losses, 0)
