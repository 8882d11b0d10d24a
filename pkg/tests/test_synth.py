import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddsd.core import Label, load_corpus, make_rng, save_corpus
from ddsd.decoder import read_lattice
from ddsd.synth import (
    AcousticInventory,
    PhraseGrammar,
    SynthConfig,
    SynthError,
    generate,
    render_utterance,
    summarize,
)

SMALL = dict(seed=11, n_directed=10, n_nondirected=10, min_words=1, max_words=3)


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    generate(SynthConfig(**SMALL), out)
    return out


class TestGenerate:
    def test_counts(self, corpus_dir):
        corpus = load_corpus(corpus_dir / "corpus.jsonl")
        assert len(corpus) == 20
        assert sum(u.label == Label.DEVICE_DIRECTED for u in corpus) == 10
        for utt in corpus:
            assert (corpus_dir / utt.audio).exists()
            read_lattice(corpus_dir / utt.lattice)

    def test_deterministic(self, corpus_dir, tmp_path):
        generate(SynthConfig(**SMALL), tmp_path)
        for rel in ["corpus.jsonl", "grammar.json", "synth_config.json", "audio/utt00003.wav", "lattices/utt00017.lat"]:
            assert (tmp_path / rel).read_bytes() == (corpus_dir / rel).read_bytes(), rel

    def test_seed_matters(self, corpus_dir, tmp_path):
        generate(SynthConfig(**{**SMALL, "seed": 12}), tmp_path)
        assert (tmp_path / "corpus.jsonl").read_bytes() != (corpus_dir / "corpus.jsonl").read_bytes()

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(SynthError, match="file"):
            generate(SynthConfig(**SMALL), blocker / "sub")

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(n_directed=0)
        with pytest.raises(ValueError):
            SynthConfig(acoustic_separation=-1.0)


class TestSeparation:
    def test_zero_separation_label_blind(self):
        config = SynthConfig(acoustic_separation=0.0)
        inventory = AcousticInventory.build(config.seed)
        for k in range(3):
            a, wa = render_utterance(Label.DEVICE_DIRECTED, config, inventory, make_rng(5, k))
            b, wb = render_utterance(Label.NON_DEVICE_DIRECTED, config, inventory, make_rng(5, k))
            assert wa == wb
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_positive_separation_changes_audio(self):
        config = SynthConfig(acoustic_separation=1.0)
        inventory = AcousticInventory.build(config.seed)
        a, _ = render_utterance(Label.DEVICE_DIRECTED, config, inventory, make_rng(5, 0))
        b, _ = render_utterance(Label.NON_DEVICE_DIRECTED, config, inventory, make_rng(5, 0))
        assert not np.array_equal(a.samples, b.samples)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 3), st.floats(0, 3), st.integers(0, 2**32 - 1))
    def test_channel_monotone(self, s1, s2, seed):
        lo, hi = sorted((s1, s2))
        c_lo = SynthConfig(acoustic_separation=lo).channel(Label.NON_DEVICE_DIRECTED, np.random.default_rng(seed))
        c_hi = SynthConfig(acoustic_separation=hi).channel(Label.NON_DEVICE_DIRECTED, np.random.default_rng(seed))
        assert c_hi[0] <= c_lo[0]  # lower snr
        assert c_hi[1] <= c_lo[1]  # steeper tilt
        assert abs(c_hi[2]) >= abs(c_lo[2])  # wider warp

    def test_directed_channel_ignores_separation(self):
        a = SynthConfig(acoustic_separation=0.0).channel(Label.DEVICE_DIRECTED, np.random.default_rng(1))
        b = SynthConfig(acoustic_separation=2.0).channel(Label.DEVICE_DIRECTED, np.random.default_rng(1))
        assert a == b


class TestGrammars:
    grammars = SynthConfig().grammars()

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_directed_samples_parse(self, seed):
        directed, _ = self.grammars
        assert directed.parses(directed.sample(np.random.default_rng(seed)))

    def test_nondirected_mostly_rejected(self):
        directed, nondirected = self.grammars
        rng = np.random.default_rng(0)
        samples = [nondirected.sample(rng) for _ in range(200)]
        assert not all(directed.parses(s) for s in samples)

    def test_directed_shorter(self):
        directed, nondirected = self.grammars
        rng = np.random.default_rng(1)
        d = [len(directed.sample(rng).split()) for _ in range(500)]
        n = [len(nondirected.sample(rng).split()) for _ in range(500)]
        assert np.mean(d) < np.mean(n)

    def test_parse_errors(self):
        with pytest.raises(SynthError, match="undefined slot"):
            PhraseGrammar.parse("play @genre\n")
        with pytest.raises(SynthError, match="no templates"):
            PhraseGrammar.parse("@x = a | b\n")

    def test_small_grammar(self):
        g = PhraseGrammar.parse("@x = red | blue\nturn @x now\n")
        assert g.parses("Turn BLUE now!")
        assert not g.parses("turn green now")


class TestSummarize:
    def test_counts(self, corpus_dir):
        report = summarize(corpus_dir / "corpus.jsonl")
        assert report["counts"] == {"directed": 10, "nondirected": 10}
        assert report["audio_seconds"] > 0
        assert report["directed"]["mean_words"] < report["nondirected"]["mean_words"]

    def test_empty(self, tmp_path):
        save_corpus([], tmp_path / "c.jsonl")
        report = summarize(tmp_path / "c.jsonl")
        assert report["counts"] == {"directed": 0, "nondirected": 0}
        assert report["audio_seconds"] == 0.0
        assert report["directed"]["mean_words"] == 0.0

    def test_missing_files(self, corpus_dir, tmp_path):
        corpus = load_corpus(corpus_dir / "corpus.jsonl")[:2]
        save_corpus(corpus, tmp_path / "c.jsonl")
        with pytest.raises(SynthError, match="missing referenced files: audio/utt0000"):
            summarize(tmp_path / "c.jsonl")
