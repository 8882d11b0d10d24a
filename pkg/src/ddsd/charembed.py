"""Character embedding of the 1-best hypothesis through a frozen vector table and a char LSTM."""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import C_DIM, make_rng, normalize_transcript
from .neural.lstm import LstmModel, extract_embedding

SPACE = "<sp>"
UNKNOWN = "<unk>"
SUPPORTED_DIMS = (50, 100, 200, 300)
CHARSET = tuple(string.ascii_lowercase + string.digits + "'") + (SPACE,)
DEFAULT_TABLE = "char_table_200.txt"


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    entries: dict
    unknown_vector: np.ndarray

    def lookup(self, token: str) -> np.ndarray:
        return self.entries.get(token, self.unknown_vector)

    def missing_tokens(self) -> list[str]:
        return [t for t in CHARSET if t not in self.entries]


def load_embedding_table(path, expected_dim: int) -> EmbeddingTable:
    """Read ``<token> v1 ... v_dim`` lines. ``<unk>`` sets the unknown vector; otherwise it is
    the mean of all loaded vectors."""
    entries = {}
    unknown = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != expected_dim:
                raise EmbeddingError(f"line {lineno}: expected {expected_dim} values, got {len(values)}")
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                raise EmbeddingError(f"line {lineno}: non-numeric value") from None
            if token == UNKNOWN:
                unknown = vec
                continue
            if token in entries:
                raise EmbeddingError(f"line {lineno}: duplicate token {token!r}")
            entries[token] = vec
    if not entries:
        raise EmbeddingError(f"{path}: no embedding vectors")
    if unknown is None:
        unknown = np.mean(np.stack(list(entries.values())), axis=0)
    return EmbeddingTable(expected_dim, entries, unknown)


def generate_table(dim: int = 200, seed: int = 0, scale: float = 0.4) -> dict:
    """Seeded random vectors for every supported character token."""
    rng = make_rng(seed, dim)
    return {token: rng.normal(0.0, scale, size=dim) for token in CHARSET}


def write_table(table: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for token, vec in table.items():
            fh.write(token + " " + " ".join(f"{v:.6f}" for v in vec) + "\n")


def default_table_path() -> Path:
    return Path(str(resources.files("ddsd") / "data" / DEFAULT_TABLE))


def char_tokens(transcript: str) -> list[str]:
    return [SPACE if ch == " " else ch for ch in normalize_transcript(transcript)]


def chars_to_vectors(transcript: str, table: EmbeddingTable) -> np.ndarray:
    tokens = char_tokens(transcript)
    if not tokens:
        return np.zeros((0, table.dim))
    return np.stack([table.lookup(t) for t in tokens])


def char_embedding(model: LstmModel, transcript: str, table: EmbeddingTable) -> np.ndarray:
    """Last-character pre-softmax output; an empty transcript maps to the zero vector."""
    if model.input_dim != table.dim:
        raise EmbeddingError(f"model input dim {model.input_dim} != table dim {table.dim}")
    vectors = chars_to_vectors(transcript, table)
    if vectors.shape[0] == 0:
        return np.zeros(C_DIM)
    return extract_embedding(model, vectors)
