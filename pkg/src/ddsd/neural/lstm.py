"""Stacked LSTM with a 2-way output projection, forward pass and BPTT."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import log_softmax, softmax


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmLayer:
    """Gate blocks are packed column-wise in the order input, forget, output, candidate."""

    w_x: np.ndarray  # (input_dim, 4H)
    w_h: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[0]


@dataclass
class LstmModel:
    layers: list[LstmLayer]
    w_out: np.ndarray  # (H_top, 2)
    b_out: np.ndarray  # (2,)
    normalization: dict | None = field(default=None)

    def __post_init__(self):
        if not self.layers:
            raise ValueError("LstmModel needs at least one layer")
        prev = self.layers[0].input_dim
        for i, layer in enumerate(self.layers):
            h = layer.hidden_dim
            if layer.input_dim != prev or layer.w_h.shape != (h, 4 * h) or layer.b.shape != (4 * h,):
                raise ValueError(f"layer {i} dimensions do not chain")
            prev = h
        if self.w_out.shape != (prev, 2) or self.b_out.shape != (2,):
            raise ValueError("output projection must be (hidden, 2) with a 2-bias")

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def hidden_dims(self) -> list[int]:
        return [layer.hidden_dim for layer in self.layers]

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.w_x, layer.w_h, layer.b])
        out.extend([self.w_out, self.b_out])
        return out

    def param_names(self) -> list[str]:
        names = []
        for i in range(len(self.layers)):
            names.extend([f"layer{i}.w_x", f"layer{i}.w_h", f"layer{i}.b"])
        return names + ["w_out", "b_out"]

    def copy(self) -> "LstmModel":
        return LstmModel(
            [LstmLayer(l.w_x.copy(), l.w_h.copy(), l.b.copy()) for l in self.layers],
            self.w_out.copy(),
            self.b_out.copy(),
            None if self.normalization is None else {k: np.array(v) for k, v in self.normalization.items()},
        )

    def normalize(self, x: np.ndarray) -> np.ndarray:
        if self.normalization is None:
            return x
        return (x - self.normalization["mean"]) / self.normalization["std"]


def init_lstm(input_dim: int, hidden_dims, rng: np.random.Generator, scale: float = 0.1) -> LstmModel:
    layers = []
    prev = input_dim
    for h in hidden_dims:
        w_x = rng.uniform(-scale, scale, size=(prev, 4 * h))
        w_h = rng.uniform(-scale, scale, size=(h, 4 * h))
        b = rng.uniform(-scale, scale, size=4 * h)
        b[h : 2 * h] = 1.0
        layers.append(LstmLayer(w_x, w_h, b))
        prev = h
    w_out = rng.uniform(-scale, scale, size=(prev, 2))
    b_out = rng.uniform(-scale, scale, size=2)
    return LstmModel(layers, w_out, b_out)


def _layer_forward(layer: LstmLayer, x: np.ndarray):
    """x: (B, T, D). Returns hidden states (B, T, H) and the per-step cache."""
    bsz, steps, _ = x.shape
    hdim = layer.hidden_dim
    proj = x @ layer.w_x + layer.b
    h = np.zeros((bsz, hdim))
    c = np.zeros((bsz, hdim))
    hs = np.empty((bsz, steps, hdim))
    gates = np.empty((bsz, steps, 4 * hdim))
    cells = np.empty((bsz, steps + 1, hdim))
    cells[:, 0] = 0.0
    for t in range(steps):
        z = proj[:, t] + h @ layer.w_h
        a = np.empty_like(z)
        a[:, : 3 * hdim] = sigmoid(z[:, : 3 * hdim])
        a[:, 3 * hdim :] = np.tanh(z[:, 3 * hdim :])
        i, f, o, g = a[:, :hdim], a[:, hdim : 2 * hdim], a[:, 2 * hdim : 3 * hdim], a[:, 3 * hdim :]
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[:, t] = h
        gates[:, t] = a
        cells[:, t + 1] = c
    return hs, (x, gates, cells, hs)


def _layer_backward(layer: LstmLayer, cache, d_hs: np.ndarray):
    x, gates, cells, hs = cache
    bsz, steps, hdim = hs.shape
    d_z = np.empty((bsz, steps, 4 * hdim))
    d_w_h = np.zeros_like(layer.w_h)
    dh_next = np.zeros((bsz, hdim))
    dc_next = np.zeros((bsz, hdim))
    w_h_t = layer.w_h.T
    for t in range(steps - 1, -1, -1):
        a = gates[:, t]
        i, f, o, g = a[:, :hdim], a[:, hdim : 2 * hdim], a[:, 2 * hdim : 3 * hdim], a[:, 3 * hdim :]
        tanh_c = np.tanh(cells[:, t + 1])
        dh = d_hs[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tanh_c**2)
        dz = d_z[:, t]
        dz[:, :hdim] = dc * g * i * (1.0 - i)
        dz[:, hdim : 2 * hdim] = dc * cells[:, t] * f * (1.0 - f)
        dz[:, 2 * hdim : 3 * hdim] = dh * tanh_c * o * (1.0 - o)
        dz[:, 3 * hdim :] = dc * i * (1.0 - g**2)
        dc_next = dc * f
        dh_next = dz @ w_h_t
        if t > 0:
            d_w_h += hs[:, t - 1].T @ dz
    d_w_x = np.einsum("btd,btg->dg", x, d_z)
    d_b = d_z.sum(axis=(0, 1))
    d_x = d_z @ layer.w_x.T
    return (d_w_x, d_w_h, d_b), d_x


def _forward_batch(model: LstmModel, x: np.ndarray):
    caches = []
    h = x
    for layer in model.layers:
        h, cache = _layer_forward(layer, h)
        caches.append(cache)
    logits = h @ model.w_out + model.b_out
    return logits, h, caches


def lstm_forward(model: LstmModel, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run one sequence ``(T, input_dim)``; returns per-frame logits ``(T, 2)`` and the last row.

    Inputs are taken as-is; apply ``model.normalize`` beforehand if the model carries statistics.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != model.input_dim:
        raise ValueError(f"expected input of shape (T, {model.input_dim}), got {inputs.shape}")
    if inputs.shape[0] < 1:
        raise ValueError("sequence must have at least one frame")
    logits, _, _ = _forward_batch(model, inputs[None])
    return logits[0], logits[0, -1].copy()


def extract_embedding(model: LstmModel, inputs: np.ndarray) -> np.ndarray:
    """Pre-softmax output of the last frame: the 2-d utterance embedding."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError("cannot embed an empty sequence")
    return lstm_forward(model, model.normalize(inputs))[1]


def pad_batch(seqs: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in seqs])
    out = np.zeros((len(seqs), lengths.max(), seqs[0].shape[1]))
    for k, s in enumerate(seqs):
        out[k, : len(s)] = s
    return out, lengths


def batch_loss_and_grads(model: LstmModel, seqs: list[np.ndarray], labels) -> tuple[float, list[np.ndarray]]:
    """Mean over the batch of per-sequence losses, each the mean framewise cross-entropy
    against the sequence label repeated at every frame. Gradients follow ``model.params()``."""
    x, lengths = pad_batch(seqs)
    labels = np.asarray(labels, dtype=int)
    bsz, steps, _ = x.shape
    logits, top, caches = _forward_batch(model, x)
    mask = (np.arange(steps)[None, :] < lengths[:, None]).astype(np.float64)
    weights = mask / lengths[:, None] / bsz
    logp = log_softmax(logits)
    picked = np.take_along_axis(logp, np.broadcast_to(labels[:, None, None], (bsz, steps, 1)), axis=2)[..., 0]
    loss = -float(np.sum(picked * weights))
    d_logits = softmax(logits)
    d_logits[np.arange(bsz), :, labels] -= 1.0
    d_logits *= weights[..., None]
    d_w_out = np.einsum("bth,btk->hk", top, d_logits)
    d_b_out = d_logits.sum(axis=(0, 1))
    d_h = d_logits @ model.w_out.T
    layer_grads = []
    for layer, cache in zip(reversed(model.layers), reversed(caches)):
        grads, d_h = _layer_backward(layer, cache, d_h)
        layer_grads.append(grads)
    out = []
    for grads in reversed(layer_grads):
        out.extend(grads)
    out.extend([d_w_out, d_b_out])
    return loss, out


def sequence_loss_and_grads(model: LstmModel, inputs: np.ndarray, label) -> tuple[float, list[np.ndarray]]:
    return batch_loss_and_grads(model, [np.asarray(inputs, dtype=np.float64)], [int(label)])
