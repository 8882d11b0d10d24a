import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddsd.decoder import Arc, BestPath, Grammar, Lattice, WordHmm, arc_posteriors, decode
from ddsd.decoder.lattice import EPSILON, best_path_arcs, enumerate_paths
from ddsd.features import (
    FEATURE_NAMES,
    ConfusionNetwork,
    FeatureError,
    arc_density,
    asr_confidence,
    assemble_decoder_features,
    build_confusion_network,
    decoder_features,
    one_best_posteriors,
    read_feature_rows,
    trellis_entropy,
    viterbi_cost_features,
    write_feature_rows,
)
from ddsd.core import UtteranceVector

from conftest import random_trellis


def _path_probs(lattice):
    paths = enumerate_paths(lattice)
    w = np.array([math.exp(-sum(lattice.arcs[k].cost for k in p)) for p in paths])
    return paths, w / w.sum()


def _random_lattice(rng, n_nodes, extra_arcs, vocab=("a", "b", "c")):
    times = np.cumsum(rng.integers(1, 4, size=n_nodes)) - 1
    nodes = {i: int(times[i]) for i in range(n_nodes)}
    arcs = [Arc(i, i + 1, str(rng.choice(vocab)), float(rng.uniform(0, 3)), float(rng.uniform(0, 1))) for i in range(n_nodes - 1)]
    for _ in range(extra_arcs):
        i, j = sorted(rng.choice(n_nodes, size=2, replace=False))
        arcs.append(Arc(int(i), int(j), str(rng.choice(vocab)), float(rng.uniform(0, 3)), float(rng.uniform(0, 1))))
    return Lattice(nodes, arcs, 0, n_nodes - 1)


class TestEntropy:
    def test_uniform(self):
        mean, hi, lo = trellis_entropy(np.full((5, 4), 0.25))
        assert mean == pytest.approx(math.log(4)) and hi == pytest.approx(math.log(4)) and lo == pytest.approx(math.log(4))

    def test_one_hot(self):
        assert trellis_entropy(np.eye(3)) == (0.0, 0.0, 0.0)

    def test_mixed(self):
        mean, hi, lo = trellis_entropy([[0.5, 0.5], [1.0, 0.0]])
        assert mean == pytest.approx(math.log(2) / 2, abs=1e-12)
        assert mean == pytest.approx(0.346574, abs=1e-6)
        assert hi == pytest.approx(0.693147, abs=1e-6)
        assert lo == 0.0

    def test_errors(self):
        with pytest.raises(FeatureError):
            trellis_entropy(np.zeros((0, 3)))
        with pytest.raises(FeatureError):
            trellis_entropy([[0.5, 0.4]])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_bounds_on_trellis_posteriors(self, s, t, seed):
        from ddsd.decoder import forward_log_probs

        trellis = random_trellis(np.random.default_rng(seed), s, t, sparse=True)
        p = np.exp(forward_log_probs(trellis))
        mean, hi, lo = trellis_entropy(p)
        assert 0.0 <= lo <= mean + 1e-12 and mean <= hi + 1e-12
        assert hi <= math.log(s) + 1e-9


class TestCosts:
    def test_example(self):
        best = BestPath(["turn", "on"], 10.0, 6.0, 4.0)
        np.testing.assert_allclose(viterbi_cost_features(best, 5), [10, 6, 4, 2, 1.2, 2])

    def test_zero(self):
        np.testing.assert_array_equal(viterbi_cost_features(BestPath([], 0.0, 0.0, 0.0), 3), 0.0)

    def test_invariant_checked(self):
        best = BestPath(["x"], 3.0, 2.0, 1.0)
        object.__setattr__(best, "lm_cost", 5.0)
        with pytest.raises(FeatureError):
            viterbi_cost_features(best, 3)


class TestConfusionNetwork:
    def test_single_path(self):
        lat = Lattice({0: 0, 1: 2, 2: 5, 3: 9}, [Arc(0, 1, "turn", 1, 1), Arc(1, 2, "on", 2, 1), Arc(2, 3, "lights", 3, 1)], 0, 3)
        cn = build_confusion_network(lat)
        assert len(cn) == 3
        assert all(slot == (( w, 1.0),) for slot, w in zip(cn.slots, ["turn", "on", "lights"]))
        assert asr_confidence(cn, ["turn", "on", "lights"]) == 1.0
        assert arc_density(cn) == (1.0, 1.0)
        assert cn.best_words() == ["turn", "on", "lights"]

    def test_parallel_tie(self):
        lat = Lattice({0: 0, 1: 4}, [Arc(0, 1, "play", 1.0, 0.5), Arc(0, 1, "pray", 1.0, 0.5)], 0, 1)
        cn = build_confusion_network(lat)
        assert len(cn) == 1
        assert dict(cn.slots[0]) == pytest.approx({"play": 0.5, "pray": 0.5})

    def test_diamond_matches_enumeration(self):
        lat = Lattice(
            {0: 0, 1: 3, 2: 6, 3: 9},
            [
                Arc(0, 1, "play", 1.0, 0.2),
                Arc(0, 1, "pray", 1.7, 0.2),
                Arc(1, 2, "some", 0.4, 0.9),
                Arc(1, 2, "sum", 0.6, 1.3),
                Arc(2, 3, "music", 2.0, 0.1),
            ],
            0,
            3,
        )
        paths, probs = _path_probs(lat)
        assert len(paths) == 4
        expected = [dict() for _ in range(3)]
        for p, w in zip(paths, probs):
            for slot, k in enumerate(p):
                word = lat.arcs[k].word
                expected[slot][word] = expected[slot].get(word, 0.0) + w
        cn = build_confusion_network(lat)
        assert len(cn) == 3
        for slot, want in zip(cn.slots, expected):
            got = dict(slot)
            assert set(got) == set(want)
            for word in want:
                assert got[word] == pytest.approx(want[word], abs=1e-9)

    def test_skip_arc_gives_epsilon(self):
        # "turn" may be skipped by a direct arc, so the "on" slot carries epsilon mass
        lat = Lattice(
            {0: 0, 1: 3, 2: 6},
            [Arc(0, 1, "turn", 1.0, 0.0), Arc(1, 2, "on", 1.0, 0.0), Arc(0, 2, "on", 2.5, 0.0)],
            0,
            2,
        )
        cn = build_confusion_network(lat)
        for slot in cn.slots:
            assert sum(p for _, p in slot) == pytest.approx(1.0, abs=1e-6)
            assert all(0.0 <= p <= 1.0 for _, p in slot)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 5), st.integers(0, 2**32 - 1))
    def test_random_lattices(self, n_nodes, extra, seed):
        lat = _random_lattice(np.random.default_rng(seed), n_nodes, extra)
        paths, probs = _path_probs(lat)
        expected = np.zeros(len(lat.arcs))
        for p, w in zip(paths, probs):
            expected[p] += w
        np.testing.assert_allclose(arc_posteriors(lat), expected, atol=1e-9)
        cn = build_confusion_network(lat)
        for slot in cn.slots:
            assert sum(p for _, p in slot) == pytest.approx(1.0, abs=1e-6)
            assert all(0.0 <= p <= 1.0 + 1e-12 for _, p in slot)
        one_best = [lat.arcs[k].word for k in best_path_arcs(lat) if lat.arcs[k].word != EPSILON]
        conf = asr_confidence(cn, one_best)
        assert 0.0 <= conf <= 1.0

    def test_slot_sum_enforced(self):
        with pytest.raises(FeatureError, match="sum"):
            ConfusionNetwork(((("a", 0.5), ("b", 0.4)),), (True,))


def _cn(posteriors, words=None):
    words = words or [f"w{i}" for i in range(len(posteriors))]
    slots = []
    for w, p in zip(words, posteriors):
        slot = [(w, p)]
        if p < 1.0:
            slot.append(("alt", 1.0 - p))
        slots.append(tuple(slot))
    return ConfusionNetwork(tuple(slots), (True,) * len(slots)), words


class TestConfidence:
    def test_all_ones(self):
        cn, words = _cn([1.0, 1.0])
        assert asr_confidence(cn, words) == 1.0

    def test_geometric_mean_quarters(self):
        cn, words = _cn([0.25, 0.25, 0.25])
        assert asr_confidence(cn, words) == pytest.approx(0.25, abs=1e-12)

    def test_geometric_mean_pair(self):
        cn, words = _cn([0.9, 0.4])
        assert asr_confidence(cn, words) == pytest.approx(math.sqrt(0.36), abs=1e-12)
        assert asr_confidence(cn, words, normalize=False) == pytest.approx(0.36, abs=1e-12)

    def test_empty(self):
        cn, _ = _cn([0.5])
        assert asr_confidence(cn, []) == 0.0

    def test_missing_word(self):
        cn, _ = _cn([0.5, 0.5], ["a", "b"])
        with pytest.raises(FeatureError, match="missing"):
            one_best_posteriors(cn, ["a", "zzz"])

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8))
    def test_bounds(self, post):
        cn, words = _cn(post)
        conf = asr_confidence(cn, words)
        assert 0.0 <= conf <= 1.0
        assert (conf == pytest.approx(1.0)) == all(p == pytest.approx(1.0) for p in post)


class TestDensity:
    def test_example(self):
        cn = ConfusionNetwork(
            ((("a", 0.5), ("b", 0.5)), (("c", 0.2), ("d", 0.3), ("e", 0.5)), (("f", 1.0),)),
            (True, True, True),
        )
        assert arc_density(cn) == (2.0, 3.0)

    def test_constant(self):
        cn = ConfusionNetwork(tuple((("a", 0.5), ("b", 0.5)) for _ in range(4)), (True,) * 4)
        assert arc_density(cn) == (2.0, 2.0)


class TestAssemble:
    def test_names(self):
        assert len(FEATURE_NAMES) == 18 and len(set(FEATURE_NAMES)) == 18

    def test_nan_named(self):
        with pytest.raises(FeatureError, match="cost_lm"):
            assemble_decoder_features((0, 0, 0), [1, 1, np.nan, 0, 0, 0], (0, 0, 0, 0), (0, 0, 0, 0, 0))

    def test_order(self):
        d = assemble_decoder_features((1, 2, 3), np.arange(4, 10), (10, 11, 12, 13), (14, 15, 16, 17, 18)).d
        np.testing.assert_array_equal(d, np.arange(1, 19))

    def _decoded(self):
        grammar = Grammar(
            (
                WordHmm("ay", [[-2.0], [-1.0]], [[1.0], [1.0]], [0.6, 0.6], 0.5),
                WordHmm("bee", [[1.0], [2.0]], [[1.0], [1.0]], [0.6, 0.6], 0.5),
            )
        )
        frames = np.random.default_rng(2).normal(scale=1.5, size=(30, 1))
        return decode(frames, grammar)

    def test_decoded_utterance(self):
        trellis, lattice, best = self._decoded()
        d = decoder_features(trellis, lattice, best).d
        assert d.shape == (18,) and np.all(np.isfinite(d))
        names = dict(zip(FEATURE_NAMES, d))
        assert names["word_count"] == len(best.words)
        assert names["frame_count"] == 30
        assert names["cost_total"] == pytest.approx(best.total_cost)
        assert 0 <= names["asr_confidence"] <= 1
        np.testing.assert_array_equal(d, decoder_features(trellis, lattice, best).d)

    def test_degenerate(self):
        trellis = random_trellis(np.random.default_rng(0), 2, 4)
        d = decoder_features(trellis, Lattice({0: 0}, [], 0, 0), BestPath([], 3.0, 3.0, 0.0)).d
        names = dict(zip(FEATURE_NAMES, d))
        assert names["asr_confidence"] == 0.0
        assert names["word_count"] == 0
        assert names["cost_total"] == 3.0


def test_feature_rows_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    rows = [(f"u{i}", UtteranceVector(rng.normal(size=2), rng.normal(size=2), rng.normal(size=18))) for i in range(3)]
    write_feature_rows(rows, tmp_path / "f.jsonl")
    back = read_feature_rows(tmp_path / "f.jsonl")
    assert [r[0] for r in back] == ["u0", "u1", "u2"]
    for (_, a), (_, b) in zip(rows, back):
        np.testing.assert_array_equal(a.f, b.f)
