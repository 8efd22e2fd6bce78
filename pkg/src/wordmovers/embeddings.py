"""Pre-trained word vector tables: loading, writing, lookup, extrema.

Two on-disk formats are supported. The binary format is an ASCII header
``<vocab_size> <dim>\\n`` followed, per word, by the token bytes, a single
0x20 space, ``dim`` little-endian IEEE-754 32-bit floats, and an optional
trailing 0x0A (the writer always emits it). The text format is one
``token v1 v2 ... vd`` line per word with single spaces.

Vectors are stored at 32-bit precision exactly as read; all arithmetic
downstream happens on a 64-bit copy.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, ParseError


@dataclass(frozen=True)
class CoordinateExtrema:
    """Smallest and largest coordinate over a set of word vectors."""

    v_min: float
    v_max: float

    def __post_init__(self):
        if not (np.isfinite(self.v_min) and np.isfinite(self.v_max)):
            raise DataError("coordinate extrema must be finite")
        if self.v_min > self.v_max:
            raise DataError(f"v_min {self.v_min} > v_max {self.v_max}")


class EmbeddingTable:
    """Immutable vocabulary -> dense vector map.

    Tokens are matched case-sensitively and exactly; the table is never
    case-folded (published embedding files contain cased entities).
    """

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise DataError("vectors must be a 2-D array")
        if len(tokens) != vectors.shape[0]:
            raise DataError("token count does not match vector count")
        if vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise DataError("table needs at least one token and one dimension")
        if not np.isfinite(vectors).all():
            raise DataError("non-finite vector entry")
        self._tokens = tuple(tokens)
        self._index = {tok: i for i, tok in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise DataError("duplicate token in vocabulary")
        self._vectors = vectors
        self._vectors.setflags(write=False)
        self._vectors64 = np.ascontiguousarray(vectors, dtype=np.float64)
        self._vectors64.setflags(write=False)
        self._fingerprint: str | None = None

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    @property
    def vectors(self) -> np.ndarray:
        """Stored float32 matrix, one row per token."""
        return self._vectors

    @property
    def vectors64(self) -> np.ndarray:
        """Float64 working copy used by all distance arithmetic."""
        return self._vectors64

    @property
    def fingerprint(self) -> str:
        """Content hash used to tie corpora and caches to one table."""
        if self._fingerprint is None:
            h = hashlib.sha256()
            h.update(str(self.dim).encode())
            for tok in self._tokens:
                h.update(tok.encode("utf-8"))
                h.update(b"\x00")
            h.update(self._vectors.tobytes())
            self._fingerprint = h.hexdigest()[:16]
        return self._fingerprint

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def word_id(self, token: str) -> int | None:
        return self._index.get(token)

    def lookup(self, token: str) -> np.ndarray | None:
        """Stored vector for `token`, or None. Case-sensitive exact match."""
        i = self._index.get(token)
        if i is None:
            return None
        return self._vectors[i]


def _normalized(vectors: np.ndarray) -> np.ndarray:
    v64 = np.asarray(vectors, dtype=np.float64)
    norms = np.sqrt((v64 * v64).sum(axis=1, keepdims=True))
    norms[norms == 0.0] = 1.0
    return (v64 / norms).astype(np.float32)


def load_word2vec_binary(path, normalize: bool = False) -> EmbeddingTable:
    """Load a table from the binary format described in the module docstring.

    Parse failures raise ParseError naming the byte offset. `normalize`
    rescales every vector to unit L2 norm (zero vectors are left alone).
    """
    path = Path(path)
    data = path.read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise ParseError(path, 0, "missing header line")
    header = data[:nl].split()
    if len(header) != 2:
        raise ParseError(path, 0, f"malformed header {data[:nl]!r}")
    try:
        vocab_size, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(path, 0, f"non-integer header {data[:nl]!r}") from None
    if vocab_size < 1:
        raise ParseError(path, 0, "empty vocabulary")
    if dim < 1:
        raise ParseError(path, 0, f"non-positive dimension {dim}")

    tokens: list[str] = []
    seen: set[str] = set()
    vectors = np.empty((vocab_size, dim), dtype=np.float32)
    vec_bytes = 4 * dim
    pos = nl + 1
    for w in range(vocab_size):
        sp = data.find(b" ", pos)
        if sp < 0:
            raise ParseError(path, pos, f"unterminated token for word {w}")
        try:
            token = data[pos:sp].decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError(path, pos, "token is not valid UTF-8") from None
        if not token:
            raise ParseError(path, pos, f"empty token for word {w}")
        if token in seen:
            raise ParseError(path, pos, f"duplicate token {token!r}")
        seen.add(token)
        pos = sp + 1
        if pos + vec_bytes > len(data):
            raise ParseError(path, pos, f"truncated vector block for {token!r}")
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=pos)
        if not np.isfinite(vec).all():
            raise ParseError(path, pos, f"non-finite value in vector of {token!r}")
        vectors[w] = vec
        tokens.append(token)
        pos += vec_bytes
        if pos < len(data) and data[pos] == 0x0A:
            pos += 1
    if normalize:
        vectors = _normalized(vectors)
    return EmbeddingTable(tokens, vectors)


def write_word2vec_binary(table: EmbeddingTable, path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"{len(table)} {table.dim}\n".encode("ascii"))
        for i, token in enumerate(table.tokens):
            fh.write(token.encode("utf-8"))
            fh.write(b" ")
            fh.write(table.vectors[i].astype("<f4").tobytes())
            fh.write(b"\n")


def _shortest_float(value: np.float32) -> str:
    # Shortest decimal that round-trips at 32-bit precision.
    return np.format_float_positional(value, unique=True, trim="-")


def load_text_embeddings(path, normalize: bool = False) -> EmbeddingTable:
    """Load a table from the one-line-per-token text format.

    Parse failures raise ParseError naming the 1-based line number.
    """
    path = Path(path)
    tokens: list[str] = []
    seen: set[str] = set()
    rows: list[np.ndarray] = []
    dim = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            if len(fields) < 2:
                raise ParseError(path, lineno, "expected token and values")
            token = fields[0]
            if token in seen:
                raise ParseError(path, lineno, f"duplicate token {token!r}")
            seen.add(token)
            if dim is None:
                dim = len(fields) - 1
            elif len(fields) - 1 != dim:
                raise ParseError(
                    path, lineno,
                    f"inconsistent dimension {len(fields) - 1} (expected {dim})")
            try:
                vec = np.array([np.float32(x) for x in fields[1:]],
                               dtype=np.float32)
            except ValueError:
                raise ParseError(path, lineno, "unparsable number") from None
            if not np.isfinite(vec).all():
                raise ParseError(path, lineno, f"non-finite value for {token!r}")
            tokens.append(token)
            rows.append(vec)
    if not tokens:
        raise ParseError(path, 1, "no embedding lines found")
    vectors = np.vstack(rows)
    if normalize:
        vectors = _normalized(vectors)
    return EmbeddingTable(tokens, vectors)


def write_text_embeddings(table: EmbeddingTable, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for i, token in enumerate(table.tokens):
            values = " ".join(_shortest_float(v) for v in table.vectors[i])
            fh.write(f"{token} {values}\n")


def coordinate_extrema(table: EmbeddingTable,
                       used_tokens: Iterable[str]) -> CoordinateExtrema:
    """Min and max over all coordinates of the vectors of `used_tokens`.

    Tokens missing from the table are ignored; an empty intersection is an
    error.
    """
    ids = [table.word_id(t) for t in used_tokens]
    ids = sorted(i for i in ids if i is not None)
    return extrema_for_ids(table, ids)


def extrema_for_ids(table: EmbeddingTable,
                    word_ids: Sequence[int]) -> CoordinateExtrema:
    if len(word_ids) == 0:
        raise DataError("no in-vocabulary tokens to take extrema over")
    block = table.vectors64[np.asarray(word_ids, dtype=np.int64)]
    return CoordinateExtrema(float(block.min()), float(block.max()))


def mean_vector_for_ids(table: EmbeddingTable,
                        word_ids: Sequence[int]) -> np.ndarray:
    if len(word_ids) == 0:
        raise DataError("no in-vocabulary tokens to average")
    block = table.vectors64[np.asarray(word_ids, dtype=np.int64)]
    return block.mean(axis=0)


__all__ = [
    "CoordinateExtrema",
    "EmbeddingTable",
    "coordinate_extrema",
    "extrema_for_ids",
    "load_text_embeddings",
    "load_word2vec_binary",
    "mean_vector_for_ids",
    "write_text_embeddings",
    "write_word2vec_binary",
]
