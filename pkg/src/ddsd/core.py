"""Shared domain types, corpus I/O and the seeded RNG contract."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

A_DIM = 2
C_DIM = 2
D_DIM = 18
F_DIM = A_DIM + C_DIM + D_DIM


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus files."""


class Label(enum.IntEnum):
    NON_DEVICE_DIRECTED = 0
    DEVICE_DIRECTED = 1

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, bool) or value not in (0, 1):
            raise CorpusError(f"label must be 0 or 1, got {value!r}")
        return cls(int(value))


_WS = re.compile(r"\s+")
_DROP = re.compile(r"[^a-z0-9' ]")


def normalize_transcript(text: str) -> str:
    """Lowercase and keep only ASCII letters, digits, apostrophe and single spaces."""
    text = _WS.sub(" ", text.lower())
    text = _DROP.sub("", text)
    return _WS.sub(" ", text).strip()


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Seeded generator; extra integers derive independent sub-streams (e.g. per-utterance)."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


@dataclass(frozen=True)
class Utterance:
    id: str
    label: Label
    transcript: str = ""
    audio: Optional[str] = None
    lattice: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("utterance id must be non-empty")
        object.__setattr__(self, "label", Label.parse(int(self.label)))
        object.__setattr__(self, "transcript", normalize_transcript(self.transcript))
        if self.audio is None and self.lattice is None and not self.transcript:
            raise CorpusError(f"utterance {self.id} has no audio, lattice or transcript")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "label": int(self.label),
            "audio": self.audio,
            "transcript": self.transcript,
            "lattice": self.lattice,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Utterance":
        try:
            return cls(
                id=obj["id"],
                label=Label.parse(obj["label"]),
                transcript=obj.get("transcript") or "",
                audio=obj.get("audio"),
                lattice=obj.get("lattice"),
            )
        except KeyError as exc:
            raise CorpusError(f"missing field {exc.args[0]}") from None


@dataclass(frozen=True)
class UtteranceVector:
    """Per-utterance features: acoustic embedding a, char embedding c, decoder features d."""

    a: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        for name, dim in (("a", A_DIM), ("c", C_DIM), ("d", D_DIM)):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (dim,):
                raise ValueError(f"{name} must have shape ({dim},), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def f(self) -> np.ndarray:
        return np.concatenate([self.a, self.c, self.d])


def load_corpus(path) -> list[Utterance]:
    corpus = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            try:
                utt = Utterance.from_json(obj)
            except CorpusError as exc:
                raise CorpusError(f"line {lineno}: {exc}") from None
            if utt.id in seen:
                raise CorpusError(f"duplicate id {utt.id}")
            seen.add(utt.id)
            corpus.append(utt)
    return corpus


def save_corpus(corpus: Iterable[Utterance], path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for utt in corpus:
            fh.write(json.dumps(utt.to_json(), sort_keys=True) + "\n")


def split_corpus(
    corpus: Sequence[Utterance], train_fraction: float, seed: int
) -> tuple[list[Utterance], list[Utterance]]:
    if not corpus:
        raise ValueError("cannot split an empty corpus")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    order = make_rng(seed).permutation(len(corpus))
    n_train = int(round(train_fraction * len(corpus)))
    train = [corpus[i] for i in order[:n_train]]
    test = [corpus[i] for i in order[n_train:]]
    return train, test
