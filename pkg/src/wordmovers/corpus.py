"""Turning labeled text into weighted documents.

A Document is the distinct in-vocabulary words of one text, canonicalized
ascending by word id, with a strictly positive weight vector summing to 1
(NBOW counts or TF-IDF, renormalized). Out-of-vocabulary tokens are
dropped silently; a text with no in-vocabulary token raises
EmptyDocumentError.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import DataError, EmptyDocumentError, ParseError

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class RawRecord:
    """One dataset row: a label and its raw text."""

    label: str
    text: str


class Document:
    """Distinct word ids (ascending) with a normalized weight vector."""

    __slots__ = ("word_ids", "weights", "table_id")

    def __init__(self, word_ids, weights, table_id: str):
        word_ids = np.asarray(word_ids, dtype=np.int64)
        weights = np.ascontiguousarray(weights, dtype=np.float64)
        if word_ids.ndim != 1 or weights.shape != word_ids.shape:
            raise DataError("word_ids and weights must be parallel 1-D arrays")
        if word_ids.size == 0:
            raise DataError("document has no words")
        if not (np.diff(word_ids) > 0).all():
            raise DataError("word_ids must be strictly ascending")
        if not (weights > 0).all():
            raise DataError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DataError(f"weights sum to {weights.sum()!r}, not 1")
        word_ids.setflags(write=False)
        weights.setflags(write=False)
        self.word_ids = word_ids
        self.weights = weights
        self.table_id = table_id

    def __len__(self) -> int:
        return self.word_ids.size

    def __repr__(self) -> str:
        return f"Document({len(self)} words, table {self.table_id})"


@dataclass(frozen=True)
class WeightScheme:
    """NBOW or TF-IDF weighting.

    For TF-IDF, `idf` maps tokens of the fitting corpus to their inverse
    document frequency and `idf_default` is used for tokens never seen
    while fitting.
    """

    kind: str
    idf: Mapping[str, float] | None = None
    idf_default: float | None = None

    def __post_init__(self):
        if self.kind not in ("nbow", "tfidf"):
            raise DataError(f"unknown weighting scheme {self.kind!r}")
        if self.kind == "tfidf":
            if self.idf is None or self.idf_default is None:
                raise DataError("tfidf scheme requires a fitted idf")
            values = list(self.idf.values()) + [self.idf_default]
            if not all(math.isfinite(v) and v >= 0 for v in values):
                raise DataError("idf values must be finite and >= 0")

    @staticmethod
    def nbow() -> "WeightScheme":
        return WeightScheme("nbow")

    def idf_of(self, token: str) -> float:
        assert self.kind == "tfidf"
        return self.idf.get(token, self.idf_default)


@dataclass
class Corpus:
    """Documents with parallel integer labels over one embedding table."""

    documents: list[Document]
    labels: np.ndarray
    label_names: list[str]
    source_table_id: str
    dropped: int = 0

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.documents) != self.labels.size:
            raise DataError("documents and labels differ in length")
        if len(self.documents) == 0:
            raise DataError("corpus is empty")
        for doc in self.documents:
            if doc.table_id != self.source_table_id:
                raise DataError("document built against a different table")

    def __len__(self) -> int:
        return len(self.documents)

    def used_word_ids(self) -> np.ndarray:
        ids = set()
        for doc in self.documents:
            ids.update(doc.word_ids.tolist())
        return np.array(sorted(ids), dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> "Corpus":
        idx = np.asarray(indices, dtype=np.int64)
        return Corpus(
            documents=[self.documents[i] for i in idx],
            labels=self.labels[idx],
            label_names=self.label_names,
            source_table_id=self.source_table_id,
        )


def _strip_outer_punct(token: str) -> str:
    start = 0
    end = len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[start:end]


def tokenize(text: str, stopwords: Iterable[str] = ()) -> list[str]:
    """Lower-case, split on whitespace, strip outer punctuation, drop
    stop words and empty tokens. Order is preserved."""
    stopset = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    out = []
    for raw in text.lower().split():
        tok = _strip_outer_punct(raw)
        if tok and tok not in stopset:
            out.append(tok)
    return out


def load_stopwords(path) -> frozenset[str]:
    path = Path(path)
    words = set()
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            word = line.strip()
            if word:
                words.add(word)
    return frozenset(words)


def fit_idf(tokenized_docs: Sequence[Sequence[str]]) -> WeightScheme:
    """Fit smoothed inverse document frequencies on a tokenized corpus.

    idf(w) = ln((1 + N) / (1 + df(w))) + 1; unseen tokens get df = 0.
    """
    if len(tokenized_docs) == 0:
        raise DataError("cannot fit idf on an empty corpus")
    n = len(tokenized_docs)
    df = Counter()
    for tokens in tokenized_docs:
        df.update(set(tokens))
    idf = {w: math.log((1 + n) / (1 + c)) + 1.0 for w, c in df.items()}
    default = math.log(1 + n) + 1.0
    return WeightScheme("tfidf", idf=idf, idf_default=default)


def build_document(tokens: Sequence[str], table: EmbeddingTable,
                   scheme: WeightScheme) -> Document:
    """Weight the distinct in-vocabulary tokens of one text.

    NBOW weight of w is count(w) / total kept count; TF-IDF weight is
    proportional to count(w) * idf(w), renormalized to sum 1.
    """
    counts: dict[int, int] = {}
    id_token: dict[int, str] = {}
    for tok in tokens:
        wid = table.word_id(tok)
        if wid is None:
            continue
        counts[wid] = counts.get(wid, 0) + 1
        id_token[wid] = tok
    if not counts:
        raise EmptyDocumentError(tokens)
    word_ids = np.array(sorted(counts), dtype=np.int64)
    raw = np.array([float(counts[w]) for w in word_ids], dtype=np.float64)
    if scheme.kind == "tfidf":
        raw *= np.array([scheme.idf_of(id_token[w]) for w in word_ids])
        # A zero idf zeroes the word out entirely; weights must stay > 0.
        keep = raw > 0
        if not keep.any():
            raise EmptyDocumentError(tokens)
        word_ids = word_ids[keep]
        raw = raw[keep]
    weights = raw / raw.sum()
    return Document(word_ids, weights, table.fingerprint)


def read_records(path) -> list[RawRecord]:
    """Read `label<TAB>text` lines; empty text after trimming is an error."""
    path = Path(path)
    records = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line:
            continue
        label, sep, text = line.partition("\t")
        if not sep:
            raise ParseError(path, lineno, "expected label<TAB>text")
        if not text.strip():
            raise ParseError(path, lineno, "empty text")
        records.append(RawRecord(label=label, text=text))
    if not records:
        raise DataError(f"{path}: no records")
    return records


def build_corpus(records: Sequence[RawRecord], table: EmbeddingTable,
                 scheme: WeightScheme, stopwords: Iterable[str] = (),
                 min_word_count: int = 1,
                 label_names: Sequence[str] | None = None) -> Corpus:
    """Tokenize and weight records; records with no usable token are
    dropped and counted in Corpus.dropped."""
    stopset = frozenset(stopwords)
    tokenized = [tokenize(r.text, stopset) for r in records]
    if min_word_count > 1:
        total = Counter()
        for tokens in tokenized:
            total.update(tokens)
        tokenized = [[t for t in tokens if total[t] >= min_word_count]
                     for tokens in tokenized]

    if label_names is None:
        label_names = sorted({r.label for r in records})
    label_index = {name: i for i, name in enumerate(label_names)}

    documents = []
    labels = []
    dropped = 0
    for record, tokens in zip(records, tokenized):
        if record.label not in label_index:
            raise DataError(f"label {record.label!r} not in label set")
        try:
            doc = build_document(tokens, table, scheme)
        except EmptyDocumentError:
            dropped += 1
            continue
        documents.append(doc)
        labels.append(label_index[record.label])
    if not documents:
        raise DataError("no record survived vocabulary filtering")
    if dropped:
        logger.info("dropped %d of %d records with no in-vocabulary token",
                    dropped, len(records))
    return Corpus(documents=documents,
                  labels=np.array(labels, dtype=np.int64),
                  label_names=list(label_names),
                  source_table_id=table.fingerprint,
                  dropped=dropped)


def load_dataset(path, table: EmbeddingTable, scheme: WeightScheme,
                 stopwords: Iterable[str] = (),
                 min_word_count: int = 1) -> Corpus:
    """One-shot `read_records` + `build_corpus` for a dataset file."""
    return build_corpus(read_records(path), table, scheme,
                        stopwords=stopwords, min_word_count=min_word_count)


__all__ = [
    "Corpus",
    "Document",
    "RawRecord",
    "WeightScheme",
    "build_corpus",
    "build_document",
    "fit_idf",
    "load_dataset",
    "load_stopwords",
    "read_records",
    "tokenize",
]
