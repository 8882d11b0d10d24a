"""The 18 decoder features: trellis entropy, Viterbi costs, confusion-network statistics.

Feature order (stable; checkpoints depend on it):

 0 mean trellis entropy      6 per-frame total cost       12 number of CN slots
 1 max trellis entropy       7 per-frame acoustic cost    13 1-best word count
 2 min trellis entropy       8 per-word LM cost           14 1-best character count
 3 total Viterbi cost        9 ASR confidence             15 utterance frame count
 4 acoustic cost            10 mean CN arc density        16 min 1-best word posterior
 5 LM cost                  11 max CN arc density         17 mean 1-best word posterior
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import D_DIM, UtteranceVector
from .decoder.lattice import EPSILON, Lattice, arc_posteriors, best_path_arcs
from .decoder.trellis import BestPath, DecodeError, Trellis, forward_log_probs

FEATURE_NAMES = (
    "entropy_mean",
    "entropy_max",
    "entropy_min",
    "cost_total",
    "cost_acoustic",
    "cost_lm",
    "cost_total_per_frame",
    "cost_acoustic_per_frame",
    "cost_lm_per_word",
    "asr_confidence",
    "arc_density_mean",
    "arc_density_max",
    "cn_slots",
    "word_count",
    "char_count",
    "frame_count",
    "word_posterior_min",
    "word_posterior_mean",
)
assert len(FEATURE_NAMES) == D_DIM


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionNetwork:
    """Ordered slots of ``(word, posterior)`` entries; ``pivot[i]`` marks slots anchored on a 1-best arc."""

    slots: tuple
    pivot: tuple

    def __post_init__(self):
        slots = tuple(tuple((str(w), float(p)) for w, p in slot) for slot in self.slots)
        pivot = tuple(bool(p) for p in self.pivot)
        if len(pivot) != len(slots):
            raise FeatureError("pivot flags must match slot count")
        for i, slot in enumerate(slots):
            if not slot:
                raise FeatureError(f"slot {i} is empty")
            total = sum(p for _, p in slot)
            if abs(total - 1.0) > 1e-6:
                raise FeatureError(f"slot {i} posteriors sum to {total}")
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "pivot", pivot)

    def __len__(self) -> int:
        return len(self.slots)

    def best_words(self) -> list[str]:
        out = []
        for slot in self.slots:
            word = max(slot, key=lambda e: e[1])[0]
            if word != EPSILON:
                out.append(word)
        return out


def trellis_entropy(posteriors) -> tuple[float, float, float]:
    """Mean, max and min over frames of the per-frame entropy (nats), with 0 ln 0 = 0."""
    p = np.asarray(posteriors, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise FeatureError("posteriors must be a non-empty (T, S) matrix")
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6, rtol=0):
        raise FeatureError("every posterior row must sum to 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    h = np.maximum(-terms.sum(axis=1), 0.0)
    return float(h.mean()), float(h.max()), float(h.min())


def viterbi_cost_features(best: BestPath, num_frames: int) -> np.ndarray:
    if num_frames < 1:
        raise FeatureError("num_frames must be >= 1")
    if abs(best.total_cost - (best.acoustic_cost + best.lm_cost)) > 1e-9 * max(1.0, abs(best.total_cost)):
        raise FeatureError("best path total cost must equal acoustic + lm cost")
    return np.array(
        [
            best.total_cost,
            best.acoustic_cost,
            best.lm_cost,
            best.total_cost / num_frames,
            best.acoustic_cost / num_frames,
            best.lm_cost / max(1, len(best.words)),
        ]
    )


def _overlap(a, b) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def build_confusion_network(lattice: Lattice) -> ConfusionNetwork:
    """Cluster lattice arcs into slots around the lattice 1-best path.

    Arc posteriors come from forward-backward over the lattice. Each arc joins the 1-best
    arc it overlaps most in time (earliest on ties). Arcs overlapping no 1-best arc are
    grouped by mutual overlap into extra slots. Missing slot mass becomes epsilon; slots
    whose mass exceeds one are renormalized.
    """
    lattice.validate()
    post = arc_posteriors(lattice)
    pivots = [k for k in best_path_arcs(lattice) if lattice.arcs[k].word != EPSILON]
    pivot_spans = [lattice.span(k) for k in pivots]
    members = {k: [k] for k in pivots}
    loose = []
    for k in range(len(lattice.arcs)):
        if k in members:
            continue
        span = lattice.span(k)
        overlaps = [_overlap(span, ps) for ps in pivot_spans]
        if overlaps and max(overlaps) > 0:
            members[pivots[int(np.argmax(overlaps))]].append(k)
        else:
            loose.append(k)

    groups = []  # (sort key, is pivot, arc ids)
    for k, ps in zip(pivots, pivot_spans):
        groups.append(((ps[0] + ps[1]) / 2.0, 0, members[k]))
    loose.sort(key=lambda k: (lattice.span(k), k))
    cluster, cluster_end = [], None
    for k in loose:
        s, e = lattice.span(k)
        if cluster and (s < cluster_end or (s == e and s == cluster_end)):
            cluster.append(k)
            cluster_end = max(cluster_end, e)
        else:
            if cluster:
                groups.append((_mid(lattice, cluster), 1, cluster))
            cluster, cluster_end = [k], e
    if cluster:
        groups.append((_mid(lattice, cluster), 1, cluster))
    groups.sort(key=lambda g: (g[0], g[1]))

    slots, flags = [], []
    for _, kind, arcs in groups:
        mass = {}
        for k in arcs:
            word = lattice.arcs[k].word
            mass[word] = mass.get(word, 0.0) + post[k]
        total = sum(mass.values())
        if total > 1.0:
            mass = {w: p / total for w, p in mass.items()}
        elif total < 1.0 - 1e-12:
            mass[EPSILON] = mass.get(EPSILON, 0.0) + (1.0 - total)
        entries = sorted(mass.items(), key=lambda e: (-e[1], e[0]))
        slots.append(entries)
        flags.append(kind == 0)
    return ConfusionNetwork(tuple(slots), tuple(flags))


def _mid(lattice: Lattice, arcs) -> float:
    spans = [lattice.span(k) for k in arcs]
    return (min(s for s, _ in spans) + max(e for _, e in spans)) / 2.0


def one_best_posteriors(cn: ConfusionNetwork, one_best) -> list[float]:
    """Posterior of each 1-best word within its pivot slot."""
    pivot_slots = [slot for slot, is_pivot in zip(cn.slots, cn.pivot) if is_pivot]
    if len(pivot_slots) != len(one_best):
        raise FeatureError(f"1-best has {len(one_best)} words but the network has {len(pivot_slots)} pivot slots")
    out = []
    for i, (word, slot) in enumerate(zip(one_best, pivot_slots)):
        lookup = dict(slot)
        if word not in lookup:
            raise FeatureError(f"word {word!r} missing from slot {i}")
        out.append(lookup[word])
    return out


def asr_confidence(cn: ConfusionNetwork, one_best, normalize: bool = True) -> float:
    """Product of 1-best word posteriors, by default length-normalized (geometric mean)."""
    if len(one_best) == 0:
        return 0.0
    post = np.array(one_best_posteriors(cn, one_best))
    if np.any(post <= 0):
        return 0.0
    log_sum = float(np.sum(np.log(post)))
    value = math.exp(log_sum / len(post)) if normalize else math.exp(log_sum)
    return min(1.0, max(0.0, value))


def arc_density(cn: ConfusionNetwork) -> tuple[float, float]:
    if len(cn) == 0:
        raise FeatureError("confusion network has no slots")
    sizes = np.array([len(slot) for slot in cn.slots], dtype=np.float64)
    return float(sizes.mean()), float(sizes.max())


@dataclass(frozen=True)
class DecoderFeatures:
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=np.float64)
        if d.shape != (D_DIM,):
            raise FeatureError(f"decoder feature vector must have {D_DIM} entries")
        bad = [FEATURE_NAMES[i] for i in np.flatnonzero(~np.isfinite(d))]
        if bad:
            raise FeatureError(f"non-finite decoder feature(s): {', '.join(bad)}")
        object.__setattr__(self, "d", d)


def assemble_decoder_features(
    entropy: tuple[float, float, float],
    costs: np.ndarray,
    cn_stats: tuple[float, float, float, float],
    hypothesis: tuple[int, int, int, float, float],
) -> DecoderFeatures:
    """``cn_stats`` = (confidence, density mean, density max, slot count);
    ``hypothesis`` = (word count, char count, frame count, min posterior, mean posterior)."""
    parts = [("entropy", entropy, 3), ("costs", costs, 6), ("cn_stats", cn_stats, 4), ("hypothesis", hypothesis, 5)]
    values = []
    offset = 0
    for name, part, size in parts:
        arr = np.asarray(part, dtype=np.float64)
        if arr.shape != (size,):
            raise FeatureError(f"{name} must have {size} entries")
        nan = np.flatnonzero(np.isnan(arr))
        if nan.size:
            raise FeatureError(f"feature {FEATURE_NAMES[offset + nan[0]]} is NaN")
        values.append(arr)
        offset += size
    return DecoderFeatures(np.concatenate(values))


def decoder_features(trellis: Trellis, lattice: Lattice, best: BestPath, normalize_confidence: bool = True) -> DecoderFeatures:
    """All 18 features for one utterance.

    An empty 1-best gives confidence and word posteriors 0; an arc-free lattice gives zero
    density and slot count.
    """
    entropy = trellis_entropy(np.exp(forward_log_probs(trellis)))
    costs = viterbi_cost_features(best, trellis.num_frames)
    words = list(best.words)
    if lattice.arcs:
        cn = build_confusion_network(lattice)
        density = arc_density(cn)
        n_slots = len(cn)
        post = one_best_posteriors(cn, words) if words else []
        confidence = asr_confidence(cn, words, normalize_confidence)
    else:
        if words:
            raise DecodeError("lattice has no arcs but the 1-best is non-empty")
        density, n_slots, post, confidence = (0.0, 0.0), 0, [], 0.0
    hyp = (
        len(words),
        len(" ".join(words)),
        trellis.num_frames,
        min(post) if post else 0.0,
        float(np.mean(post)) if post else 0.0,
    )
    return assemble_decoder_features(entropy, costs, (confidence, density[0], density[1], n_slots), hyp)


def write_feature_rows(rows, path) -> None:
    """Rows of ``(id, UtteranceVector)`` as JSONL ``{"id", "a", "c", "d"}``."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for uid, vec in rows:
            obj = {"id": uid, "a": [float(v) for v in vec.a], "c": [float(v) for v in vec.c], "d": [float(v) for v in vec.d]}
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def read_feature_rows(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rows.append((obj["id"], UtteranceVector(np.array(obj["a"]), np.array(obj["c"]), np.array(obj["d"]))))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise FeatureError(f"{path}:{lineno}: {exc}") from None
    return rows
