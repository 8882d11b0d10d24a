import numpy as np
import pytest

from ddsd.charembed import (
    CHARSET,
    SPACE,
    EmbeddingError,
    char_embedding,
    char_tokens,
    chars_to_vectors,
    default_table_path,
    generate_table,
    load_embedding_table,
    write_table,
)
from ddsd.core import normalize_transcript
from ddsd.neural import init_lstm
from ddsd.neural import lstm as lstm_mod

from gradcheck import max_relative_error


def _write(path, rows):
    path.write_text("".join(f"{tok} " + " ".join(str(v) for v in vec) + "\n" for tok, vec in rows))
    return path


@pytest.fixture
def small_table(tmp_path):
    rows = [("a", [1, 0, 0, 0]), ("b", [0, 2, 0, 0]), (SPACE, [0, 0, 3, 1])]
    return load_embedding_table(_write(tmp_path / "t.txt", rows), 4)


class TestTable:
    def test_three_rows(self, small_table):
        assert small_table.dim == 4
        assert set(small_table.entries) == {"a", "b", SPACE}

    def test_wrong_arity(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("a 1 2 3 4\nb 1 2 3\n")
        with pytest.raises(EmbeddingError, match="line 2: expected 4 values"):
            load_embedding_table(path, 4)

    def test_duplicate(self, tmp_path):
        path = _write(tmp_path / "t.txt", [("a", [1, 2]), ("a", [3, 4])])
        with pytest.raises(EmbeddingError, match="duplicate"):
            load_embedding_table(path, 2)

    def test_unknown_is_mean(self, small_table):
        np.testing.assert_allclose(small_table.lookup("z"), [1 / 3, 2 / 3, 1.0, 1 / 3])

    def test_explicit_unknown_row(self, tmp_path):
        path = _write(tmp_path / "t.txt", [("a", [1, 1]), ("<unk>", [5, 5])])
        table = load_embedding_table(path, 2)
        np.testing.assert_array_equal(table.lookup("q"), [5, 5])
        assert "<unk>" not in table.entries

    def test_shipped_table_covers_charset(self):
        table = load_embedding_table(default_table_path(), 200)
        assert table.missing_tokens() == []
        assert len(table.entries) == len(CHARSET)

    def test_generator_round_trip(self, tmp_path):
        table = generate_table(dim=50, seed=3)
        write_table(table, tmp_path / "t.txt")
        loaded = load_embedding_table(tmp_path / "t.txt", 50)
        for tok in CHARSET:
            np.testing.assert_allclose(loaded.lookup(tok), table[tok], atol=1e-6)


class TestVectors:
    def test_hi(self, tmp_path):
        table = load_embedding_table(_write(tmp_path / "t.txt", [("h", [1, 0]), ("i", [0, 1])]), 2)
        np.testing.assert_array_equal(chars_to_vectors("hi", table), [[1, 0], [0, 1]])

    def test_empty(self, small_table):
        assert chars_to_vectors("", small_table).shape == (0, 4)

    def test_space_is_a_token(self, small_table):
        rows = chars_to_vectors("a a", small_table)
        assert rows.shape == (3, 4)
        np.testing.assert_array_equal(rows[0], rows[2])
        np.testing.assert_array_equal(rows[1], [0, 0, 3, 1])
        assert char_tokens("a b") == ["a", SPACE, "b"]


class TestCharEmbedding:
    def test_dims_and_purity(self, small_table, rng):
        model = init_lstm(4, [6], rng)
        c = char_embedding(model, "ab ba", small_table)
        assert c.shape == (2,)
        np.testing.assert_array_equal(c, char_embedding(model, "ab ba", small_table))

    def test_empty_transcript(self, small_table, rng):
        np.testing.assert_array_equal(char_embedding(init_lstm(4, [3], rng), "", small_table), [0.0, 0.0])

    def test_normalization_idempotent(self, small_table, rng):
        model = init_lstm(4, [3], rng)
        raw = "  AB,   ba! "
        np.testing.assert_array_equal(
            char_embedding(model, raw, small_table), char_embedding(model, normalize_transcript(raw), small_table)
        )

    def test_dim_mismatch(self, small_table, rng):
        with pytest.raises(EmbeddingError):
            char_embedding(init_lstm(5, [3], rng), "ab", small_table)

    def test_char_lstm_gradients(self, small_table, rng):
        model = init_lstm(4, [5], rng)
        for p in model.params():
            p[...] = rng.uniform(-0.5, 0.5, size=p.shape)
        seqs = [chars_to_vectors(t, small_table) for t in ("ab a", "bb", "a")]
        labels = [1, 0, 1]
        _, grads = lstm_mod.batch_loss_and_grads(model, seqs, labels)
        loss_fn = lambda: lstm_mod.batch_loss_and_grads(model, seqs, labels)[0]
        assert max_relative_error(loss_fn, model.params(), grads) < 1e-4
