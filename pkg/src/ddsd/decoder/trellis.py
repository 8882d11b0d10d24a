"""HMM trellis: forward recursion and Viterbi search in log space."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class Trellis:
    log_transition: np.ndarray  # (S, S)
    log_emission: np.ndarray  # (T, S)
    log_initial: np.ndarray  # (S,)

    def __post_init__(self):
        a = np.asarray(self.log_transition, dtype=np.float64)
        e = np.asarray(self.log_emission, dtype=np.float64)
        pi = np.asarray(self.log_initial, dtype=np.float64)
        s = pi.shape[0] if pi.ndim == 1 else -1
        if a.shape != (s, s) or e.ndim != 2 or e.shape[1] != s:
            raise DecodeError(f"inconsistent trellis shapes {a.shape}, {e.shape}, {pi.shape}")
        if not np.allclose(np.exp(logsumexp(a, axis=1)), 1.0, atol=1e-9, rtol=0):
            raise DecodeError("transition rows must sum to 1")
        if abs(np.exp(logsumexp(pi)) - 1.0) > 1e-9:
            raise DecodeError("initial distribution must sum to 1")
        object.__setattr__(self, "log_transition", a)
        object.__setattr__(self, "log_emission", e)
        object.__setattr__(self, "log_initial", pi)

    @property
    def num_states(self) -> int:
        return self.log_initial.shape[0]

    @property
    def num_frames(self) -> int:
        return self.log_emission.shape[0]

    def path_log_prob(self, states) -> float:
        states = np.asarray(states)
        lp = self.log_initial[states[0]] + self.log_emission[np.arange(len(states)), states].sum()
        return float(lp + self.log_transition[states[:-1], states[1:]].sum())

    def to_json(self) -> dict:
        return {
            "log_transition": self.log_transition.tolist(),
            "log_emission": self.log_emission.tolist(),
            "log_initial": self.log_initial.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Trellis":
        return cls(*(np.array(obj[k], dtype=np.float64) for k in ("log_transition", "log_emission", "log_initial")))


def save_trellis(trellis: Trellis, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(trellis.to_json(), fh)


def load_trellis(path) -> Trellis:
    with open(path, encoding="utf-8") as fh:
        return Trellis.from_json(json.load(fh))


@dataclass(frozen=True)
class BestPath:
    words: list[str]
    total_cost: float
    acoustic_cost: float
    lm_cost: float
    state_sequence: list[int] = field(default_factory=list)

    def __post_init__(self):
        if abs(self.total_cost - (self.acoustic_cost + self.lm_cost)) > 1e-9 * max(1.0, abs(self.total_cost)):
            raise DecodeError("total_cost must equal acoustic_cost + lm_cost")


def _check_frames(trellis: Trellis) -> None:
    if trellis.num_frames < 1:
        raise DecodeError("trellis has no frames")
    dead = np.all(np.isneginf(trellis.log_emission), axis=1)
    if np.any(dead):
        raise DecodeError(f"impossible frame {int(np.argmax(dead))}")


def forward_log_probs(trellis: Trellis) -> np.ndarray:
    """Per-frame log posteriors ``log p(s_t | x_1..x_t)`` from the normalized forward recursion."""
    _check_frames(trellis)
    out = np.empty_like(trellis.log_emission)
    alpha = trellis.log_initial + trellis.log_emission[0]
    for t in range(trellis.num_frames):
        if t > 0:
            alpha = logsumexp(out[t - 1][:, None] + trellis.log_transition, axis=0) + trellis.log_emission[t]
        norm = logsumexp(alpha)
        if not np.isfinite(norm):
            raise DecodeError(f"impossible frame {t}")
        out[t] = alpha - norm
    return out


def viterbi(trellis: Trellis) -> BestPath:
    """Most likely state sequence; ties go to the lower state index."""
    _check_frames(trellis)
    n_frames, n_states = trellis.log_emission.shape
    back = np.zeros((n_frames, n_states), dtype=np.int64)
    delta = trellis.log_initial + trellis.log_emission[0]
    for t in range(1, n_frames):
        scores = delta[:, None] + trellis.log_transition
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(n_states)] + trellis.log_emission[t]
    best = int(np.argmax(delta))
    if not np.isfinite(delta[best]):
        raise DecodeError("no path has finite probability")
    states = [best]
    for t in range(n_frames - 1, 0, -1):
        states.append(int(back[t, states[-1]]))
    states.reverse()
    cost = -float(delta[best])
    return BestPath([], cost, cost, 0.0, states)
