from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits, target) -> tuple[float, np.ndarray]:
    """Loss ``-log softmax(logits)[target]`` and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    target = int(target)
    loss = -log_softmax(logits)[target]
    grad = softmax(logits)
    grad[target] -= 1.0
    return float(loss), grad
