"""Exact Word Mover's Distance via a transportation network simplex.

Distances between documents are objectives of the transportation problem
min <C, F> subject to row sums f_x and column sums f_y, where C holds
Euclidean distances between word vectors. All ground distances, cached or
not, come out of one compiled kernel, so enabling the cache never changes
a single bit of any result.
"""

from __future__ import annotations

import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .corpus import Corpus, Document
from .embeddings import EmbeddingTable
from .errors import DataError, NumericalError, ParseError

MARGINAL_TOL = 1e-9
ENTER_TOL = 1e-11
PERTURBATION = 1e-13


@dataclass(frozen=True)
class TransportPlan:
    """Optimal flow matrix with its objective and dual potentials."""

    flow: np.ndarray
    objective: float
    row_potentials: np.ndarray
    col_potentials: np.ndarray
    pivots: int


class DistanceCache:
    """Shared ground-distance cache keyed by unordered word-id pairs.

    Backed by a lazily grown dense matrix over the ids seen so far, which
    keeps block lookups cheap when many document pairs share vocabulary.
    Negative ids are legal (the embedding module hands out non-negative
    ids; random documents use negative ones), but one cache must only ever
    see vectors from a single id space. Concurrent use is safe: values are
    deterministic, so racing writers store identical numbers.
    """

    def __init__(self, initial_capacity: int = 256):
        self._slots: dict[int, int] = {}
        self._matrix = np.full((initial_capacity, initial_capacity), np.nan)
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        """Number of cached unordered pairs (self-pairs count once)."""
        filled = ~np.isnan(self._matrix)
        n = len(self._slots)
        if n == 0:
            return 0
        sub = filled[:n, :n]
        return int((np.tril(sub).sum()))

    def _slots_for(self, ids: np.ndarray) -> np.ndarray:
        out = np.empty(ids.size, dtype=np.int64)
        slots = self._slots
        missing = []
        for t, wid in enumerate(ids.tolist()):
            s = slots.get(wid)
            if s is None:
                missing.append(t)
            else:
                out[t] = s
        if missing:
            cap = self._matrix.shape[0]
            needed = len(slots) + len(missing)
            if needed > cap:
                while cap < needed:
                    cap *= 2
                grown = np.full((cap, cap), np.nan)
                old = self._matrix.shape[0]
                grown[:old, :old] = self._matrix
                self._matrix = grown
            for t in missing:
                wid = int(ids[t])
                s = slots.get(wid)
                if s is None:
                    s = len(slots)
                    slots[wid] = s
                out[t] = s
        return out

    def lookup_block(self, ids_x: np.ndarray, vx: np.ndarray,
                     ids_y: np.ndarray, vy: np.ndarray) -> np.ndarray:
        """Distance block for ids_x x ids_y, computing and storing misses.

        vx and vy are the float64 vectors parallel to the id arrays.
        """
        with self._lock:
            cx = self._slots_for(ids_x)
            cy = self._slots_for(ids_y)
            block = self._matrix[np.ix_(cx, cy)]
            miss = np.isnan(block)
            n_miss = int(miss.sum())
            if n_miss:
                fresh = _kernels.pairwise_distances(
                    np.ascontiguousarray(vx), np.ascontiguousarray(vy))
                block = np.where(miss, fresh, block)
                self._matrix[np.ix_(cx, cy)] = block
                self._matrix[np.ix_(cy, cx)] = block.T
            self.hits += block.size - n_miss
            self.misses += n_miss
            return block

    def distance(self, a: int, va: np.ndarray, b: int,
                 vb: np.ndarray) -> float:
        block = self.lookup_block(np.array([a]), va.reshape(1, -1),
                                  np.array([b]), vb.reshape(1, -1))
        return float(block[0, 0])


def ground_distance(table: EmbeddingTable, a: int, b: int) -> float:
    """Euclidean distance between the vectors of two word ids (float64)."""
    v = table.vectors64
    block = _kernels.pairwise_distances(
        np.ascontiguousarray(v[a:a + 1]), np.ascontiguousarray(v[b:b + 1]))
    return float(block[0, 0])


def _check_same_table(table: EmbeddingTable, *docs: Document) -> None:
    for doc in docs:
        if doc.table_id != table.fingerprint:
            raise DataError("document was built against a different table")


def cost_matrix(table: EmbeddingTable, x: Document, y: Document,
                cache: DistanceCache | None = None) -> np.ndarray:
    """Ground-distance matrix between the words of x and y.

    With a cache the block is served from it (identical values, fewer
    kernel evaluations); without, it is computed directly.
    """
    _check_same_table(table, x, y)
    v = table.vectors64
    vx = v[x.word_ids]
    vy = v[y.word_ids]
    if cache is None:
        return _kernels.pairwise_distances(np.ascontiguousarray(vx),
                                           np.ascontiguousarray(vy))
    return cache.lookup_block(x.word_ids, vx, y.word_ids, vy)


def solve_transport(f_x: np.ndarray, f_y: np.ndarray,
                    cost: np.ndarray) -> TransportPlan:
    """Solve the transportation problem exactly.

    Marginals must be strictly positive and each sum to 1 within 1e-9.
    The returned plan is a basic optimal solution: at most
    len(f_x) + len(f_y) - 1 strictly positive flows, marginals reproduced
    within 1e-9, and all reduced costs >= -1e-10.
    """
    f_x = np.ascontiguousarray(f_x, dtype=np.float64)
    f_y = np.ascontiguousarray(f_y, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape != (f_x.size, f_y.size):
        raise DataError(
            f"cost shape {cost.shape} does not match marginals "
            f"({f_x.size}, {f_y.size})")
    for name, w in (("f_x", f_x), ("f_y", f_y)):
        if w.size == 0:
            raise DataError(f"{name} is empty")
        if not (w > 0).all():
            raise DataError(f"{name} must be strictly positive")
        if abs(w.sum() - 1.0) > MARGINAL_TOL:
            raise DataError(f"{name} sums to {w.sum()!r}, not 1")

    max_pivots = 200 * f_x.size * f_y.size + 1000
    flow, objective, u, v, pivots, status = _kernels.solve_transportation(
        cost, f_x, f_y, PERTURBATION, ENTER_TOL, max_pivots)
    if status != _kernels.STATUS_OK:
        raise NumericalError(
            f"transportation simplex hit the pivot limit ({max_pivots})")
    return TransportPlan(flow=flow, objective=float(objective),
                         row_potentials=u, col_potentials=v, pivots=pivots)


def wmd(table: EmbeddingTable, x: Document, y: Document,
        cache: DistanceCache | None = None) -> float:
    """Word Mover's Distance between two documents."""
    cost = cost_matrix(table, x, y, cache)
    return solve_transport(x.weights, y.weights, cost).objective


def wmd_vectors(vx: np.ndarray, wx: np.ndarray, vy: np.ndarray,
                wy: np.ndarray) -> float:
    """WMD between two ad-hoc word-vector sets with given weights."""
    cost = _kernels.pairwise_distances(
        np.ascontiguousarray(vx, dtype=np.float64),
        np.ascontiguousarray(vy, dtype=np.float64))
    return solve_transport(wx, wy, cost).objective


def _pack_documents(table: EmbeddingTable, docs: Sequence[Document]):
    v = table.vectors64
    vecs = np.ascontiguousarray(np.concatenate([v[d.word_ids] for d in docs]))
    weights = np.ascontiguousarray(np.concatenate([d.weights for d in docs]))
    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    np.cumsum([len(d) for d in docs], out=offsets[1:])
    return vecs, weights, offsets


def wmd_pairwise(table: EmbeddingTable, corpus_a: Corpus, corpus_b: Corpus,
                 cache: DistanceCache | None = None,
                 workers: int = 1) -> np.ndarray:
    """All pairwise WMDs between two corpora (rows: a, columns: b).

    When both arguments are the same object, only the upper triangle is
    solved; the matrix is mirrored and the diagonal is computed like any
    other entry (it comes out exactly 0). With a cache, each row fetches
    its words-versus-vocabulary distance block once and the solves gather
    from it; the values are bitwise those of the uncached path. Results
    do not depend on `workers`.
    """
    if corpus_a.source_table_id != table.fingerprint or \
            corpus_b.source_table_id != table.fingerprint:
        raise DataError("corpora were built against a different table")
    same = corpus_a is corpus_b
    docs_a = corpus_a.documents
    docs_b = corpus_b.documents
    na, nb = len(docs_a), len(docs_b)
    out = np.zeros((na, nb), dtype=np.float64)
    v = table.vectors64

    if cache is None:
        vecs_b, weights_b, offsets_b = _pack_documents(table, docs_b)

        def fill_row(i: int) -> None:
            x = docs_a[i]
            vx = np.ascontiguousarray(v[x.word_ids])
            js = np.arange(i if same else 0, nb, dtype=np.int64)
            row = _kernels.wmd_pairs_direct(vx, x.weights, vecs_b,
                                            weights_b, offsets_b, js,
                                            PERTURBATION, ENTER_TOL)
            if np.any(row < 0.0):
                raise NumericalError(
                    f"transportation solve failed in row {i}")
            out[i, i if same else 0:] = row
    else:
        used_b = corpus_b.used_word_ids()
        vecs_used_b = np.ascontiguousarray(v[used_b])
        # Position of every column document's words inside used_b.
        col_slots = np.concatenate(
            [np.searchsorted(used_b, d.word_ids) for d in docs_b])
        offsets_b = np.zeros(nb + 1, dtype=np.int64)
        np.cumsum([len(d) for d in docs_b], out=offsets_b[1:])
        weights_b = np.ascontiguousarray(
            np.concatenate([d.weights for d in docs_b]))

        def fill_row(i: int) -> None:
            x = docs_a[i]
            block = cache.lookup_block(x.word_ids,
                                       np.ascontiguousarray(v[x.word_ids]),
                                       used_b, vecs_used_b)
            js = np.arange(i if same else 0, nb, dtype=np.int64)
            row = _kernels.wmd_pairs_gather(
                np.ascontiguousarray(block), x.weights, col_slots,
                weights_b, offsets_b, js, PERTURBATION, ENTER_TOL)
            if np.any(row < 0.0):
                raise NumericalError(
                    f"transportation solve failed in row {i}")
            out[i, i if same else 0:] = row

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill_row, range(na)))
    else:
        for i in range(na):
            fill_row(i)

    if same:
        iu = np.triu_indices(na, k=1)
        out[(iu[1], iu[0])] = out[iu]
    return out


def write_distance_matrix(path, matrix: np.ndarray) -> None:
    """Binary format: u64 rows, u64 cols, then row-major little-endian f64."""
    matrix = np.asarray(matrix, dtype=np.float64)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(struct.pack("<QQ", matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.astype("<f8").tobytes())


def read_distance_matrix(path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 16:
        raise ParseError(path, 0, "missing header")
    rows, cols = struct.unpack_from("<QQ", data)
    expected = 16 + rows * cols * 8
    if len(data) != expected:
        raise ParseError(path, 16, f"expected {expected} bytes, got {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=16).reshape(rows, cols).copy()


def write_distance_matrix_tsv(path, matrix: np.ndarray) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write("\t".join(repr(float(v)) for v in row))
            fh.write("\n")


__all__ = [
    "DistanceCache",
    "TransportPlan",
    "cost_matrix",
    "ground_distance",
    "read_distance_matrix",
    "solve_transport",
    "wmd",
    "wmd_pairwise",
    "wmd_vectors",
    "write_distance_matrix",
    "write_distance_matrix_tsv",
]
