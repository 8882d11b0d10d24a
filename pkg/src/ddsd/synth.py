"""Deterministic synthetic corpus: transcripts, filtered-noise audio and decoder lattices.

Device-directed transcripts come from a short command grammar and nondevice-directed
ones from a longer spontaneous grammar; ``style_confusion`` swaps the grammar for a
fraction of utterances. Audio renders a class-independent sequence of acoustic words
(phone-like spectral envelopes over white noise). Only the recording conditions depend
on the class: signal-to-noise ratio, spectral tilt, formant warp and the level of a
competing talker, all moved in proportion to ``acoustic_separation``. With zero
separation the audio carries no label information.
"""

from __future__ import annotations

import json
import re
import wave
from collections import Counter
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Label, Utterance, load_corpus, make_rng, normalize_transcript, save_corpus
from .decoder import DecoderConfig, Grammar, WordHmm, decode, save_grammar, write_lattice
from .frontend import FrontendConfig, PcmAudio, compute_lfbe, read_wav, write_wav

ACOUSTIC_WORDS = ("play", "stop", "music", "what", "time", "weather", "well", "that", "yeah", "okay")
NUM_PHONES = 8
# spoken-word frequencies (Zipf-like); the decoder's unigram LM uses the same law
_ZIPF = 1.0 / np.sqrt(np.arange(1, len(ACOUSTIC_WORDS) + 1))
WORD_FREQUENCIES = _ZIPF / _ZIPF.sum()
SHIFT = 160  # samples per 10 ms frame at 16 kHz


class SynthError(RuntimeError):
    pass


# ---------------------------------------------------------------- text grammars


@dataclass(frozen=True)
class PhraseGrammar:
    slots: dict
    templates: tuple

    @classmethod
    def parse(cls, text: str) -> "PhraseGrammar":
        slots, templates = {}, []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("@") and "=" in line:
                name, options = line.split("=", 1)
                choices = tuple(normalize_transcript(o) for o in options.split("|"))
                if not all(choices):
                    raise SynthError(f"line {lineno}: empty slot option")
                slots[name.strip()[1:]] = choices
            else:
                templates.append(line)
        for t in templates:
            for ref in re.findall(r"@(\w+)", t):
                if ref not in slots:
                    raise SynthError(f"template {t!r} uses undefined slot @{ref}")
        if not templates:
            raise SynthError("grammar has no templates")
        return cls(slots, tuple(templates))

    @classmethod
    def load(cls, path) -> "PhraseGrammar":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def sample(self, rng: np.random.Generator) -> str:
        template = self.templates[rng.integers(len(self.templates))]
        out = re.sub(r"@(\w+)", lambda m: self.slots[m.group(1)][rng.integers(len(self.slots[m.group(1)]))], template)
        return normalize_transcript(out)

    def _regex(self):
        alts = []
        for t in self.templates:
            pieces = re.split(r"(@\w+)", " ".join(t.lower().split()))
            pattern = ""
            for piece in pieces:
                if piece.startswith("@"):
                    pattern += "(?:" + "|".join(re.escape(o) for o in self.slots[piece[1:]]) + ")"
                else:
                    pattern += re.escape(piece)
            alts.append(pattern)
        return re.compile("^(?:" + "|".join(alts) + ")$")

    def parses(self, text: str) -> bool:
        if not hasattr(self, "_compiled"):
            object.__setattr__(self, "_compiled", self._regex())
        return self._compiled.match(normalize_transcript(text)) is not None


def shipped_grammar_path(name: str) -> Path:
    return Path(str(resources.files("ddsd") / "data" / f"{name}.txt"))


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 20190401
    n_directed: int = 1250
    n_nondirected: int = 1250
    acoustic_separation: float = 1.0
    style_confusion: float = 0.05
    directed_grammar: Optional[str] = None
    nondirected_grammar: Optional[str] = None
    sample_rate: int = 16000
    min_words: int = 3
    max_words: int = 8
    snr_db: float = 20.0
    snr_shift_db: float = 8.0
    snr_spread_db: float = 4.0
    tilt_shift_db_per_khz: float = 1.0
    tilt_spread_db_per_khz: float = 0.6
    warp_spread: float = 0.02
    warp_spread_shift: float = 0.08
    level_range_db: float = 4.0
    babble_db: float = -25.0
    babble_shift_db: float = 14.0
    babble_spread_db: float = 3.0
    decoder: DecoderConfig = field(default_factory=DecoderConfig)

    def __post_init__(self):
        if self.n_directed < 1 or self.n_nondirected < 1:
            raise ValueError("class counts must be >= 1")
        if not (np.isfinite(self.acoustic_separation) and self.acoustic_separation >= 0):
            raise ValueError("acoustic_separation must be finite and >= 0")
        if not 0.0 <= self.style_confusion <= 1.0:
            raise ValueError("style_confusion must lie in [0, 1]")
        if self.sample_rate != 16000:
            raise ValueError("only 16 kHz synthesis is supported")
        if not 1 <= self.min_words <= self.max_words:
            raise ValueError("need 1 <= min_words <= max_words")
        if isinstance(self.decoder, dict):
            object.__setattr__(self, "decoder", DecoderConfig(**self.decoder))

    def grammars(self) -> tuple[PhraseGrammar, PhraseGrammar]:
        d = self.directed_grammar or shipped_grammar_path("directed")
        n = self.nondirected_grammar or shipped_grammar_path("nondirected")
        return PhraseGrammar.load(d), PhraseGrammar.load(n)

    def channel(self, label: Label, rng: np.random.Generator) -> tuple[float, float, float]:
        """Per-utterance (snr dB, tilt dB/kHz, formant warp factor).

        For nondevice-directed speech the snr and tilt means shift and the warp spread
        widens, each in proportion to ``acoustic_separation``.
        """
        shift = 0.0 if label == Label.DEVICE_DIRECTED else self.acoustic_separation
        snr = rng.normal(self.snr_db - shift * self.snr_shift_db, self.snr_spread_db)
        tilt = rng.normal(-shift * self.tilt_shift_db_per_khz, self.tilt_spread_db_per_khz)
        warp = rng.normal(0.0, self.warp_spread + shift * self.warp_spread_shift)
        return float(snr), float(tilt), float(np.clip(warp, -0.3, 0.3))


# ---------------------------------------------------------------- acoustic rendering


@dataclass(frozen=True)
class AcousticInventory:
    """Phone spectral envelopes (magnitude vs frequency) and word pronunciations."""

    centers: np.ndarray  # (P, 2) formant centers in Hz
    widths: np.ndarray  # (P, 2)
    gains: np.ndarray  # (P, 2)
    words: dict  # word -> tuple of phone ids

    @classmethod
    def build(cls, seed: int) -> "AcousticInventory":
        rng = make_rng(seed, 7)
        lo = np.sort(rng.uniform(250, 1000, size=NUM_PHONES))
        hi = rng.uniform(1200, 6500, size=NUM_PHONES)
        centers = np.stack([lo, hi], axis=1)
        widths = rng.uniform(150, 500, size=(NUM_PHONES, 2))
        gains = rng.uniform(4.0, 12.0, size=(NUM_PHONES, 2))
        words = {}
        for w in ACOUSTIC_WORDS:
            while True:
                phones = tuple(int(p) for p in rng.integers(NUM_PHONES, size=rng.integers(2, 4)))
                if phones not in words.values():
                    break
            words[w] = phones
        return cls(centers, widths, gains, words)

    def envelope(self, phone: int, freqs: np.ndarray, warp: float = 0.0) -> np.ndarray:
        env = np.full_like(freqs, 0.2)
        for c, w, g in zip(self.centers[phone], self.widths[phone], self.gains[phone]):
            env += g * np.exp(-0.5 * ((freqs - c * (1.0 + warp)) / w) ** 2)
        return env


def _colored_noise(rng, n: int, envelope, sample_rate: int) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    return np.fft.irfft(spectrum * envelope(freqs), n=n)


def render_phones(phones, durations, inventory: AcousticInventory, rng, sample_rate: int, warp: float = 0.0) -> np.ndarray:
    pieces = [
        _colored_noise(rng, int(d) * SHIFT, lambda f, p=p: inventory.envelope(p, f, warp), sample_rate)
        for p, d in zip(phones, durations)
    ]
    return np.concatenate(pieces)


def apply_channel(speech: np.ndarray, snr_db: float, tilt_db_per_khz: float, level_db: float, rng, sample_rate: int) -> np.ndarray:
    n = len(speech)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    tilted = np.fft.irfft(np.fft.rfft(speech) * 10.0 ** (tilt_db_per_khz * freqs / 1000.0 / 20.0), n=n)
    tilted /= np.sqrt(np.mean(tilted**2)) + 1e-12
    noise = _colored_noise(rng, n, lambda f: 1.0 / np.sqrt(1.0 + f / 500.0), sample_rate)
    noise *= 10.0 ** (-snr_db / 20.0) / (np.sqrt(np.mean(noise**2)) + 1e-12)
    mix = tilted + noise
    mix *= 10.0 ** (level_db / 20.0) / np.sqrt(np.mean(mix**2))
    return np.clip(mix, -1.0, 1.0)


def babble_db_mix(speech: np.ndarray, rel_db: float, inventory: AcousticInventory, rng, sample_rate: int) -> np.ndarray:
    """Competing talker: random acoustic words at ``rel_db`` relative to ``speech``."""
    phones, durations, total = [], [], 0
    while total * SHIFT < len(speech):
        word = ACOUSTIC_WORDS[rng.integers(len(ACOUSTIC_WORDS))]
        for p in inventory.words[word]:
            d = int(rng.integers(6, 15))
            phones.append(p)
            durations.append(d)
            total += d
    other = render_phones(phones, durations, inventory, rng, sample_rate)[: len(speech)]
    gain = 10.0 ** (rel_db / 20.0) * np.sqrt(np.mean(speech**2) / (np.mean(other**2) + 1e-12))
    return gain * other


def _level(config: SynthConfig, rng) -> float:
    return float(rng.uniform(-20.0 - config.level_range_db / 2, -20.0 + config.level_range_db / 2))


def _phone_durations(rng, count: int) -> np.ndarray:
    return rng.integers(7, 16, size=count)


def render_utterance(label: Label, config: SynthConfig, inventory: AcousticInventory, rng) -> tuple[PcmAudio, list[str]]:
    n_words = int(rng.integers(config.min_words, config.max_words + 1))
    words = [ACOUSTIC_WORDS[i] for i in rng.choice(len(ACOUSTIC_WORDS), size=n_words, p=WORD_FREQUENCIES)]
    phones = [p for w in words for p in inventory.words[w]]
    snr, tilt, warp = config.channel(label, rng)
    speech = render_phones(phones, _phone_durations(rng, len(phones)), inventory, rng, config.sample_rate, warp)
    level = _level(config, rng)
    shift = 0.0 if label == Label.DEVICE_DIRECTED else config.acoustic_separation
    babble_db = rng.normal(config.babble_db + shift * config.babble_shift_db, config.babble_spread_db)
    speech = speech + babble_db_mix(speech, babble_db, inventory, rng, config.sample_rate)
    return PcmAudio(apply_channel(speech, snr, tilt, level, rng, config.sample_rate), config.sample_rate), words


def estimate_grammar(config: SynthConfig, inventory: AcousticInventory, frontend: FrontendConfig, per_phone: int = 40) -> Grammar:
    """Fit diagonal Gaussians per phone on isolated renderings under the device-directed channel."""
    rng = make_rng(config.seed, 8)
    frames = {p: [] for p in range(NUM_PHONES)}
    for p in range(NUM_PHONES):
        for _ in range(per_phone):
            dur = int(rng.integers(8, 15))
            snr, tilt, warp = config.channel(Label.DEVICE_DIRECTED, rng)
            speech = render_phones([p], [dur], inventory, rng, config.sample_rate, warp)
            audio = PcmAudio(apply_channel(speech, snr, tilt, _level(config, rng), rng, config.sample_rate), config.sample_rate)
            frames[p].append(compute_lfbe(audio, frontend).frames)
    stats = {}
    for p, chunks in frames.items():
        x = np.concatenate(chunks)
        stats[p] = (x.mean(axis=0), np.maximum(x.var(axis=0), 0.05))
    mean_dur = 11.0
    words = []
    for i, w in enumerate(ACOUSTIC_WORDS):
        phones = inventory.words[w]
        words.append(
            WordHmm(
                word=w,
                means=np.stack([stats[p][0] for p in phones]),
                variances=np.stack([stats[p][1] for p in phones]),
                self_loop=np.full(len(phones), 1.0 - 1.0 / mean_dur),
                unigram=float(WORD_FREQUENCIES[i]),
            )
        )
    return Grammar(tuple(words))


# ---------------------------------------------------------------- corpus generation


def _labels(config: SynthConfig) -> np.ndarray:
    labels = np.array([1] * config.n_directed + [0] * config.n_nondirected)
    return labels[make_rng(config.seed, 1).permutation(len(labels))]


def _config_json(config: SynthConfig) -> dict:
    obj = asdict(config)
    obj["decoder"] = asdict(config.decoder)
    return obj


def generate(config: SynthConfig, out_dir, frontend: FrontendConfig | None = None) -> Path:
    """Write ``corpus.jsonl`` plus audio, lattices and the decoder grammar; returns the manifest path."""
    frontend = frontend or FrontendConfig()
    out = Path(out_dir)
    try:
        (out / "audio").mkdir(parents=True, exist_ok=True)
        (out / "lattices").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SynthError(f"cannot create output directory {out}: {exc}") from exc
    directed, nondirected = config.grammars()
    inventory = AcousticInventory.build(config.seed)
    grammar = estimate_grammar(config, inventory, frontend)
    save_grammar(grammar, out / "grammar.json")
    corpus = []
    for i, label in enumerate(_labels(config)):
        label = Label(int(label))
        rng = make_rng(config.seed, 100, i)
        style = directed if label == Label.DEVICE_DIRECTED else nondirected
        if rng.random() < config.style_confusion:
            style = nondirected if style is directed else directed
        transcript = style.sample(rng)
        audio, _ = render_utterance(label, config, inventory, rng)
        uid = f"utt{i:05d}"
        write_wav(out / "audio" / f"{uid}.wav", audio)
        # decode the quantized signal so stored lattices match what readers of the WAV see
        lfbe = compute_lfbe(read_wav(out / "audio" / f"{uid}.wav"), frontend)
        _, lattice, _ = decode(lfbe, grammar, config.decoder)
        write_lattice(lattice, out / "lattices" / f"{uid}.lat")
        corpus.append(Utterance(uid, label, transcript, f"audio/{uid}.wav", f"lattices/{uid}.lat"))
    manifest = out / "corpus.jsonl"
    save_corpus(corpus, manifest)
    with open(out / "synth_config.json", "w", encoding="utf-8") as fh:
        json.dump(_config_json(config), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def summarize(manifest) -> dict:
    """Class counts, transcript length statistics and total audio duration."""
    manifest = Path(manifest)
    corpus = load_corpus(manifest)
    root = manifest.parent
    missing = []
    for utt in corpus:
        for rel in (utt.audio, utt.lattice):
            if rel is not None and not (root / rel).exists():
                missing.append(rel)
    if missing:
        raise SynthError(f"missing referenced files: {', '.join(missing)}")
    counts = Counter(int(u.label) for u in corpus)
    report = {"counts": {"directed": counts.get(1, 0), "nondirected": counts.get(0, 0)}}
    for name, label in (("directed", 1), ("nondirected", 0)):
        words = [len(u.transcript.split()) for u in corpus if int(u.label) == label]
        chars = [len(u.transcript) for u in corpus if int(u.label) == label]
        report[name] = {
            "mean_words": float(np.mean(words)) if words else 0.0,
            "mean_chars": float(np.mean(chars)) if chars else 0.0,
            "max_chars": int(max(chars)) if chars else 0,
        }
    duration = 0.0
    for utt in corpus:
        if utt.audio is not None:
            with wave.open(str(root / utt.audio), "rb") as wf:
                duration += wf.getnframes() / wf.getframerate()
    report["audio_seconds"] = duration
    return report
