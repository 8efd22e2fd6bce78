import numpy as np
import pytest

from wordmovers.corpus import Corpus, Document, RawRecord, WeightScheme, build_corpus
from wordmovers.embeddings import EmbeddingTable


def make_table(n_words, dim, seed=0, scale=1.0, prefix="w"):
    rng = np.random.default_rng(seed)
    vectors = (rng.normal(size=(n_words, dim)) * scale).astype(np.float32)
    return EmbeddingTable([f"{prefix}{i}" for i in range(n_words)], vectors)


def random_document(table, rng, max_len=6):
    """Document with rational weights over a random word subset."""
    size = int(rng.integers(1, max_len + 1))
    ids = np.sort(rng.choice(len(table), size=size, replace=False))
    counts = rng.integers(1, 6, size=size).astype(np.float64)
    return Document(ids.astype(np.int64), counts / counts.sum(),
                    table.fingerprint)


def corpus_from_documents(table, documents, labels=None):
    labels = labels if labels is not None else np.zeros(len(documents), dtype=np.int64)
    names = [str(c) for c in sorted(set(int(l) for l in labels))]
    remap = {int(name): i for i, name in enumerate(names)}
    return Corpus(documents=list(documents),
                  labels=np.array([remap[int(l)] for l in labels]),
                  label_names=names,
                  source_table_id=table.fingerprint)


def two_cluster_table(n_per_side=20, dim=8, seed=5, separation=1.0,
                      jitter=0.15):
    """Vocabulary split into two word-vector clusters at +-separation."""
    rng = np.random.default_rng(seed)
    center = np.zeros(dim)
    center[0] = separation
    side_a = rng.normal(scale=jitter, size=(n_per_side, dim)) + center
    side_b = rng.normal(scale=jitter, size=(n_per_side, dim)) - center
    tokens = [f"a{i}" for i in range(n_per_side)] + \
        [f"b{i}" for i in range(n_per_side)]
    return EmbeddingTable(tokens, np.vstack([side_a, side_b]).astype(np.float32))


def two_cluster_records(table, n_docs, seed, min_len=4, max_len=9,
                        own_prob=0.9):
    """Two-class records whose tokens mostly come from the class cluster."""
    words = list(table.tokens)
    half = len(words) // 2
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_docs):
        cls = i % 2
        own = words[:half] if cls == 0 else words[half:]
        other = words[half:] if cls == 0 else words[:half]
        length = int(rng.integers(min_len, max_len))
        tokens = [own[int(rng.integers(half))]
                  if rng.random() < own_prob
                  else other[int(rng.integers(half))]
                  for _ in range(length)]
        records.append(RawRecord(label=str(cls), text=" ".join(tokens)))
    return records


@pytest.fixture(scope="session")
def small_table():
    return make_table(30, 8, seed=0)


@pytest.fixture(scope="session")
def cluster_setup():
    table = two_cluster_table()
    records = two_cluster_records(table, 200, seed=11)
    corpus = build_corpus(records, table, WeightScheme.nbow())
    return table, corpus
