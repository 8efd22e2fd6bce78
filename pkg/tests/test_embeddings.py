import numpy as np
import pytest

from wordmovers.embeddings import (CoordinateExtrema, EmbeddingTable,
                                   coordinate_extrema, extrema_for_ids,
                                   load_text_embeddings, load_word2vec_binary,
                                   write_text_embeddings, write_word2vec_binary)
from wordmovers.errors import DataError, ParseError

from conftest import make_table


class TestBinaryFormat:
    def test_small_fixture(self, tmp_path):
        path = tmp_path / "emb.bin"
        payload = b"2 3\n" + b"a " + np.array([1, 0, 0], "<f4").tobytes() + \
            b"\n" + b"b " + np.array([0, 1, 0], "<f4").tobytes() + b"\n"
        path.write_bytes(payload)
        table = load_word2vec_binary(path)
        assert len(table) == 2 and table.dim == 3
        assert table.tokens == ("a", "b")
        np.testing.assert_array_equal(table.lookup("a"), [1, 0, 0])

    def test_no_trailing_newline(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"1 2\n" + b"tok " + np.array([2, 3], "<f4").tobytes())
        table = load_word2vec_binary(path)
        np.testing.assert_array_equal(table.lookup("tok"), [2, 3])

    def test_empty_vocab_rejected(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"0 3\n")
        with pytest.raises(ParseError, match="empty vocabulary"):
            load_word2vec_binary(path)

    def test_truncated_block_names_offset(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"1 4\n" + b"tok " + b"\x00" * 7)
        with pytest.raises(ParseError, match="truncated"):
            load_word2vec_binary(path)

    def test_duplicate_token(self, tmp_path):
        path = tmp_path / "emb.bin"
        vec = np.zeros(2, "<f4").tobytes()
        path.write_bytes(b"2 2\n" + b"x " + vec + b"\nx " + vec + b"\n")
        with pytest.raises(ParseError, match="duplicate"):
            load_word2vec_binary(path)

    def test_non_finite_value(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"1 2\n" + b"x " +
                         np.array([np.nan, 0], "<f4").tobytes())
        with pytest.raises(ParseError, match="non-finite"):
            load_word2vec_binary(path)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "emb.bin"
        path.write_bytes(b"two 3\nrest")
        with pytest.raises(ParseError, match="non-integer header"):
            load_word2vec_binary(path)

    def test_round_trip_bit_for_bit(self, tmp_path):
        table = make_table(3, 5, seed=42)
        path = tmp_path / "rt.bin"
        write_word2vec_binary(table, path)
        loaded = load_word2vec_binary(path)
        assert loaded.tokens == table.tokens
        assert np.array_equal(loaded.vectors, table.vectors)
        assert loaded.fingerprint == table.fingerprint


class TestTextFormat:
    def test_two_lines(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("a 1 0\nb 0 1\n")
        table = load_text_embeddings(path)
        assert table.dim == 2 and table.tokens == ("a", "b")

    def test_inconsistent_dimension_names_line(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("a 1 0 3\nb 0 1\n")
        with pytest.raises(ParseError, match=r"\(at 2\)"):
            load_text_embeddings(path)

    def test_unparsable_number(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("a 1 zero\n")
        with pytest.raises(ParseError, match="unparsable"):
            load_text_embeddings(path)

    def test_round_trip_100_lines(self, tmp_path):
        table = make_table(100, 7, seed=3)
        path = tmp_path / "rt.txt"
        write_text_embeddings(table, path)
        loaded = load_text_embeddings(path)
        assert loaded.tokens == table.tokens
        assert np.array_equal(loaded.vectors, table.vectors)


class TestLookup:
    def test_present(self):
        table = EmbeddingTable(["a", "b"], np.array([[1, 0], [0, 1]], np.float32))
        np.testing.assert_array_equal(table.lookup("a"), [1, 0])

    def test_case_sensitive(self):
        table = EmbeddingTable(["a"], np.array([[1, 0]], np.float32))
        assert table.lookup("A") is None

    def test_exhaustive_scan(self):
        table = make_table(1000, 4, seed=9)
        for token in table.tokens:
            assert table.lookup(token) is not None
        assert table.lookup("not-there") is None

    def test_pure_function(self):
        table = make_table(10, 4)
        first = table.lookup("w3").copy()
        table.lookup("w7")
        np.testing.assert_array_equal(table.lookup("w3"), first)


class TestExtrema:
    def test_unit_vectors(self):
        table = EmbeddingTable(["a", "b"], np.array([[1, 0], [0, 1]], np.float32))
        ext = coordinate_extrema(table, {"a", "b"})
        assert ext == CoordinateExtrema(0.0, 1.0)

    def test_single_word(self):
        table = EmbeddingTable(["a"], np.array([[-2, 3, 0.5]], np.float32))
        ext = coordinate_extrema(table, {"a"})
        assert ext.v_min == -2.0 and ext.v_max == 3.0

    def test_empty_intersection(self):
        table = make_table(4, 3)
        with pytest.raises(DataError):
            coordinate_extrema(table, {"none", "of", "these"})

    def test_matches_brute_force(self):
        table = make_table(50, 6, seed=17)
        lo = min(float(v) for row in table.vectors64 for v in row)
        hi = max(float(v) for row in table.vectors64 for v in row)
        ext = coordinate_extrema(table, set(table.tokens))
        assert ext.v_min == lo and ext.v_max == hi

    def test_permutation_invariant_and_monotone(self):
        table = make_table(12, 5, seed=2)
        tokens = list(table.tokens)
        forward = coordinate_extrema(table, tokens[:6])
        backward = coordinate_extrema(table, tokens[5::-1])
        assert forward == backward
        wider = coordinate_extrema(table, tokens)
        assert wider.v_min <= forward.v_min and wider.v_max >= forward.v_max


class TestTableInvariants:
    def test_rejects_duplicates(self):
        with pytest.raises(DataError, match="duplicate"):
            EmbeddingTable(["x", "x"], np.zeros((2, 2), np.float32))

    def test_rejects_non_finite(self):
        with pytest.raises(DataError):
            EmbeddingTable(["x"], np.array([[np.inf, 0]], np.float32))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            EmbeddingTable([], np.zeros((0, 2), np.float32))

    def test_normalize_flag(self, tmp_path):
        table = make_table(5, 4, seed=1, scale=3.0)
        path = tmp_path / "n.bin"
        write_word2vec_binary(table, path)
        normalized = load_word2vec_binary(path, normalize=True)
        norms = np.linalg.norm(normalized.vectors64, axis=1)
        assert np.abs(norms - 1.0).max() < 1e-6

    def test_storage_is_float32(self):
        table = make_table(3, 3)
        assert table.vectors.dtype == np.float32
        assert table.vectors64.dtype == np.float64
