"""Fully connected classifier with ReLU hidden layers and a 2-logit output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import log_softmax, softmax

ACTIVATIONS = ("relu", "identity")


@dataclass
class DenseLayer:
    w: np.ndarray  # (in, out)
    b: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class MlpModel:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("MlpModel needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.w.shape[1] != b.w.shape[0]:
                raise ValueError(f"layers {i} and {i + 1} do not chain")
        for layer in self.layers:
            if layer.b.shape != (layer.w.shape[1],):
                raise ValueError("bias width must match weight columns")
        if self.layers[-1].w.shape[1] != 2:
            raise ValueError("final layer must produce 2 logits")

    @property
    def input_dim(self) -> int:
        return self.layers[0].w.shape[0]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.w, layer.b])
        return out

    def param_names(self) -> list[str]:
        names = []
        for i in range(len(self.layers)):
            names.extend([f"layer{i}.w", f"layer{i}.b"])
        return names

    def copy(self) -> "MlpModel":
        return MlpModel([DenseLayer(l.w.copy(), l.b.copy(), l.activation) for l in self.layers])


def init_mlp(input_dim: int, hidden_dims, rng: np.random.Generator) -> MlpModel:
    dims = [input_dim, *hidden_dims, 2]
    layers = []
    for k, (n_in, n_out) in enumerate(zip(dims, dims[1:])):
        limit = np.sqrt(6.0 / (n_in + n_out))
        act = "identity" if k == len(dims) - 2 else "relu"
        layers.append(DenseLayer(rng.uniform(-limit, limit, size=(n_in, n_out)), np.zeros(n_out), act))
    return MlpModel(layers)


def _forward(model: MlpModel, x: np.ndarray):
    acts = [x]
    h = x
    for layer in model.layers:
        h = h @ layer.w + layer.b
        if layer.activation == "relu":
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def mlp_forward(model: MlpModel, inputs) -> np.ndarray:
    """Logits for one vector ``(in,)`` or a batch ``(N, in)``."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[-1] != model.input_dim or x.ndim not in (1, 2):
        raise ValueError(f"expected input dimension {model.input_dim}, got shape {x.shape}")
    return _forward(model, x)[-1]


def batch_loss_and_grads(model: MlpModel, x: np.ndarray, labels) -> tuple[float, list[np.ndarray]]:
    """Mean cross-entropy over the batch and gradients following ``model.params()``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    labels = np.asarray(labels, dtype=int)
    n = x.shape[0]
    acts = _forward(model, x)
    logits = acts[-1]
    loss = -float(np.mean(log_softmax(logits)[np.arange(n), labels]))
    delta = softmax(logits)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    grads = []
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        if layer.activation == "relu":
            delta = delta * (acts[k + 1] > 0)
        grads.append(delta.sum(axis=0))
        grads.append(acts[k].T @ delta)
        delta = delta @ layer.w.T
    return loss, grads[::-1]
