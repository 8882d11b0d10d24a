"""Miniature word-loop decoder with diagonal-Gaussian word HMMs and a unigram LM.

All word HMMs are strictly left-to-right. The composite trellis runs every word in
parallel; leaving a word's final state re-enters the first state of any word with
probability proportional to its unigram. Costs are negative natural-log probabilities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..frontend import LfbeSequence
from .lattice import Arc, Lattice
from .trellis import BestPath, DecodeError, Trellis, viterbi

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class WordHmm:
    word: str
    means: np.ndarray  # (K, D)
    variances: np.ndarray  # (K, D)
    self_loop: np.ndarray  # (K,) probability of staying in each state
    unigram: float

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        loops = np.atleast_1d(np.asarray(self.self_loop, dtype=np.float64))
        if variances.shape != means.shape or loops.shape != (means.shape[0],):
            raise ValueError(f"word {self.word!r}: inconsistent state parameter shapes")
        if np.any(variances <= 0):
            raise ValueError(f"word {self.word!r}: variances must be positive")
        if np.any((loops < 0) | (loops >= 1)):
            raise ValueError(f"word {self.word!r}: self-loop probabilities must lie in [0, 1)")
        if not 0 < self.unigram <= 1:
            raise ValueError(f"word {self.word!r}: unigram must lie in (0, 1]")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "self_loop", loops)

    @property
    def num_states(self) -> int:
        return self.means.shape[0]


@dataclass(frozen=True)
class Grammar:
    words: tuple

    def __post_init__(self):
        words = tuple(self.words)
        if not words:
            raise DecodeError("grammar has no words")
        names = [w.word for w in words]
        if len(set(names)) != len(names):
            raise DecodeError("grammar words must be unique")
        dims = {w.means.shape[1] for w in words}
        if len(dims) != 1:
            raise DecodeError("all word models must share a feature dimension")
        total = sum(w.unigram for w in words)
        if abs(total - 1.0) > 1e-9:
            raise DecodeError(f"unigram probabilities sum to {total}, expected 1")
        object.__setattr__(self, "words", words)

    @property
    def dim(self) -> int:
        return self.words[0].means.shape[1]

    def state_table(self):
        """(word index, position) for every composite state, and each word's first state index."""
        owner, position, first = [], [], []
        for w, hmm in enumerate(self.words):
            first.append(len(owner))
            owner.extend([w] * hmm.num_states)
            position.extend(range(hmm.num_states))
        return np.array(owner), np.array(position), np.array(first)

    def to_json(self) -> dict:
        return {
            "words": [
                {
                    "word": w.word,
                    "means": w.means.tolist(),
                    "variances": w.variances.tolist(),
                    "self_loop": w.self_loop.tolist(),
                    "unigram": w.unigram,
                }
                for w in self.words
            ]
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Grammar":
        return cls(tuple(WordHmm(**w) for w in obj["words"]))


def save_grammar(grammar: Grammar, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(grammar.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_grammar(path) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return Grammar.from_json(json.load(fh))


@dataclass(frozen=True)
class DecoderConfig:
    beam: float = 10.0
    acoustic_scale: float = 0.1

    def __post_init__(self):
        if not self.beam >= 0:
            raise ValueError("beam must be non-negative")
        if self.acoustic_scale <= 0:
            raise ValueError("acoustic_scale must be positive")


def emission_log_likelihoods(frames: np.ndarray, grammar: Grammar, acoustic_scale: float = 1.0) -> np.ndarray:
    """Scaled diagonal-Gaussian log-likelihoods, shape ``(T, S)`` over composite states."""
    means = np.concatenate([w.means for w in grammar.words])
    ivar = 1.0 / np.concatenate([w.variances for w in grammar.words])
    const = np.sum(np.log(np.concatenate([w.variances for w in grammar.words])) + _LOG_2PI, axis=1)
    quad = (frames**2) @ ivar.T - 2.0 * frames @ (means * ivar).T + np.sum(means**2 * ivar, axis=1)
    return -0.5 * acoustic_scale * (quad + const)


def _word_transitions(grammar: Grammar):
    """Within-word and word-entry transition probabilities as separate S x S matrices."""
    owner, position, first = grammar.state_table()
    n = len(owner)
    within = np.zeros((n, n))
    entry = np.zeros((n, n))
    unigrams = np.array([w.unigram for w in grammar.words])
    for s in range(n):
        hmm = grammar.words[owner[s]]
        k = position[s]
        stay = hmm.self_loop[k]
        within[s, s] = stay
        if k + 1 < hmm.num_states:
            within[s, s + 1] = 1.0 - stay
        else:
            entry[s, first] += (1.0 - stay) * unigrams
    return within, entry


def build_trellis(frames: np.ndarray, grammar: Grammar, acoustic_scale: float = 1.0) -> Trellis:
    _, _, first = grammar.state_table()
    within, entry = _word_transitions(grammar)
    n = within.shape[0]
    initial = np.zeros(n)
    initial[first] = [w.unigram for w in grammar.words]
    with np.errstate(divide="ignore"):
        return Trellis(
            np.log(within + entry),
            emission_log_likelihoods(frames, grammar, acoustic_scale),
            np.log(initial),
        )


def segment_words(states, grammar: Grammar) -> list[tuple[int, int, int]]:
    """Split a composite state path into ``(word index, start frame, end frame)`` tokens.

    A self-transition on a single-state word counts as a new token only when the
    re-entry probability exceeds the self-loop probability.
    """
    owner, position, _ = grammar.state_table()
    within, entry = _word_transitions(grammar)
    tokens = []
    start = 0
    for t in range(1, len(states)):
        prev, cur = states[t - 1], states[t]
        if position[cur] != 0:
            continue
        if cur != prev or entry[prev, cur] > within[prev, cur]:
            tokens.append((int(owner[states[start]]), start, t))
            start = t
    tokens.append((int(owner[states[start]]), start, len(states)))
    return tokens


def _segment_log_score(emission: np.ndarray, hmm: WordHmm, first_state: int, t0: int, t1: int, final: bool) -> float:
    """Best in-word score for one word forced to span frames [t0, t1).

    Non-final segments must end in the last state and pay the exit transition; the
    utterance-final segment may stop in any state, as the Viterbi search allows.
    """
    k = hmm.num_states
    if not final and t1 - t0 < k:
        return -np.inf
    em = emission[t0:t1, first_state : first_state + k]
    with np.errstate(divide="ignore"):
        log_stay = np.log(hmm.self_loop)
        log_move = np.log1p(-hmm.self_loop)
    delta = np.full(k, -np.inf)
    delta[0] = em[0, 0]
    for t in range(1, t1 - t0):
        moved = np.full(k, -np.inf)
        moved[1:] = delta[:-1] + log_move[:-1]
        delta = np.maximum(delta + log_stay, moved) + em[t]
    if final:
        return float(np.max(delta))
    return float(delta[-1] + log_move[-1])


def decode(lfbe, grammar: Grammar, config: DecoderConfig | None = None) -> tuple[Trellis, Lattice, BestPath]:
    """Decode an LFBE sequence into a trellis, a beam-pruned word lattice and the 1-best path.

    The lattice keeps the 1-best segmentation and, for every segment, each word whose
    best forced alignment to that segment lies within ``beam`` of the segment's winner.
    With independent segments this is exactly the set of word sequences whose best path
    lies within the beam of the overall best.
    """
    config = config or DecoderConfig()
    frames = lfbe.frames if isinstance(lfbe, LfbeSequence) else np.asarray(lfbe, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise DecodeError("cannot decode an empty feature sequence")
    if frames.shape[1] != grammar.dim:
        raise DecodeError(f"feature dimension {frames.shape[1]} != grammar dimension {grammar.dim}")
    trellis = build_trellis(frames, grammar, config.acoustic_scale)
    state_path = viterbi(trellis)
    tokens = segment_words(state_path.state_sequence, grammar)
    _, _, first = grammar.state_table()

    words = [grammar.words[w].word for w, _, _ in tokens]
    lm_cost = float(sum(-np.log(grammar.words[w].unigram) for w, _, _ in tokens))
    best = BestPath(words, state_path.total_cost, state_path.total_cost - lm_cost, lm_cost, state_path.state_sequence)

    n_frames = frames.shape[0]
    nodes = {0: 0}
    arcs = []
    for j, (_, t0, t1) in enumerate(tokens):
        nodes[j + 1] = t1
        final = t1 == n_frames
        candidates = []
        for w, hmm in enumerate(grammar.words):
            score = _segment_log_score(trellis.log_emission, hmm, first[w], t0, t1, final)
            if np.isfinite(score):
                candidates.append((w, -score, -np.log(hmm.unigram)))
        best_cost = min(ac + lm for _, ac, lm in candidates)
        for w, ac, lm in candidates:
            if ac + lm - best_cost <= config.beam:
                arcs.append(Arc(j, j + 1, grammar.words[w].word, float(ac), float(lm)))
    lattice = Lattice(nodes, arcs, 0, len(tokens))
    return trellis, lattice, best
