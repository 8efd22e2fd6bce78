"""Random-feature document embeddings from the Word Mover's Distance.

Each of R random documents omega_j is a short set of random word vectors
drawn coordinate-wise uniform on [v_min, v_max] (extrema taken over the
words of the corpus being embedded), with its length drawn uniform on
{1, ..., D_max} and uniform word weights. A document x maps to the vector
Z(x) with entries exp(-gamma * WMD(x, omega_j)) / sqrt(R); inner products
of these vectors are Monte-Carlo estimates of a positive-definite
document kernel.

Random draws are reproducible per index: omega_j depends only on
(seed, j) through a splitmix64-mixed key feeding a counter-based Philox
stream, so bases are prefix-nested in R and independent of generation
order or thread count.
"""

from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .corpus import Corpus, Document
from .embeddings import (CoordinateExtrema, EmbeddingTable, extrema_for_ids,
                         mean_vector_for_ids)
from .errors import DataError, NumericalError, ParseError
from .transport import ENTER_TOL, PERTURBATION, DistanceCache, solve_transport

D_MIN = 1
_MASK64 = (1 << 64) - 1


def mix_seed(seed: int, index: int) -> int:
    """splitmix64 of (seed, index): the key of substream `index`."""
    z = (seed + 0x9E3779B97F4A7C15 * index) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RandomBasisSpec:
    """Everything needed to regenerate a random basis exactly.

    `center`, when set, shifts every sampled coordinate by the per-axis
    mean of the embedded words; the extrema are then taken over the
    centered vectors. Default is the plain [v_min, v_max] box.
    """

    r: int
    d_max: int
    gamma: float
    seed: int
    dim: int
    extrema: CoordinateExtrema
    center: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.r < 1:
            raise DataError(f"r must be >= 1, got {self.r}")
        if self.d_max < D_MIN:
            raise DataError(f"d_max must be >= {D_MIN}, got {self.d_max}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise DataError(f"gamma must be positive, got {self.gamma}")
        if self.dim < 1:
            raise DataError(f"dim must be >= 1, got {self.dim}")
        if self.center is not None and len(self.center) != self.dim:
            raise DataError("center length does not match dim")

    def serialize(self) -> str:
        lines = [
            f"r={self.r}",
            f"d_max={self.d_max}",
            f"gamma={self.gamma!r}",
            f"seed={self.seed}",
            f"dim={self.dim}",
            f"v_min={self.extrema.v_min!r}",
            f"v_max={self.extrema.v_max!r}",
        ]
        if self.center is not None:
            lines.append("center=" + ",".join(repr(c) for c in self.center))
        return "\n".join(lines) + "\n"

    @staticmethod
    def deserialize(text: str, source: str = "<string>") -> "RandomBasisSpec":
        fields: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParseError(source, lineno, f"expected key=value, got {line!r}")
            fields[key.strip()] = value.strip()
        try:
            center = None
            if "center" in fields:
                center = tuple(float(c) for c in fields["center"].split(","))
            return RandomBasisSpec(
                r=int(fields["r"]),
                d_max=int(fields["d_max"]),
                gamma=float(fields["gamma"]),
                seed=int(fields["seed"]),
                dim=int(fields["dim"]),
                extrema=CoordinateExtrema(float(fields["v_min"]),
                                          float(fields["v_max"])),
                center=center,
            )
        except KeyError as exc:
            raise ParseError(source, 0, f"missing key {exc}") from None
        except ValueError as exc:
            raise ParseError(source, 0, str(exc)) from None

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256(self.serialize().encode("utf-8"))
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class RandomDocument:
    """One sampled random document: word vectors, uniform weights, ids.

    The ids are negative and unique within a basis; they key the shared
    ground-distance cache (table ids are non-negative, so the spaces
    never collide).
    """

    vectors: np.ndarray
    weights: np.ndarray
    word_ids: np.ndarray

    def __len__(self) -> int:
        return self.vectors.shape[0]


def sample_random_document(spec: RandomBasisSpec,
                           index: int) -> RandomDocument:
    """Sample omega_index (1-based). Depends only on (spec.seed, index)."""
    if not (1 <= index <= spec.r):
        raise DataError(f"index {index} outside 1..{spec.r}")
    gen = np.random.Generator(np.random.Philox(key=mix_seed(spec.seed, index)))
    length = int(gen.integers(D_MIN, spec.d_max + 1))
    vectors = gen.uniform(spec.extrema.v_min, spec.extrema.v_max,
                          size=(length, spec.dim))
    if spec.center is not None:
        vectors = vectors + np.asarray(spec.center, dtype=np.float64)
    vectors = np.ascontiguousarray(vectors)
    vectors.setflags(write=False)
    weights = np.full(length, 1.0 / length)
    weights.setflags(write=False)
    base = -(index - 1) * spec.d_max - 1
    word_ids = np.arange(base, base - length, -1, dtype=np.int64)
    word_ids.setflags(write=False)
    return RandomDocument(vectors=vectors, weights=weights, word_ids=word_ids)


@dataclass(frozen=True)
class RandomBasis:
    """A spec together with its R materialized random documents."""

    spec: RandomBasisSpec
    docs: tuple[RandomDocument, ...]

    @staticmethod
    def from_spec(spec: RandomBasisSpec) -> "RandomBasis":
        docs = tuple(sample_random_document(spec, j)
                     for j in range(1, spec.r + 1))
        return RandomBasis(spec=spec, docs=docs)

    @property
    def fingerprint(self) -> str:
        return self.spec.fingerprint


def basis_spec_for_corpus(table: EmbeddingTable, corpus: Corpus, r: int,
                          d_max: int, gamma: float, seed: int,
                          center_mean: bool = False) -> RandomBasisSpec:
    """Build a spec whose sampling box covers the corpus vocabulary.

    Extrema are taken over the vectors of the words that actually occur
    in `corpus`, not the whole table.
    """
    ids = corpus.used_word_ids()
    if center_mean:
        center = mean_vector_for_ids(table, ids)
        block = table.vectors64[ids] - center
        extrema = CoordinateExtrema(float(block.min()), float(block.max()))
        return RandomBasisSpec(r=r, d_max=d_max, gamma=gamma, seed=seed,
                               dim=table.dim, extrema=extrema,
                               center=tuple(float(c) for c in center))
    return RandomBasisSpec(r=r, d_max=d_max, gamma=gamma, seed=seed,
                           dim=table.dim, extrema=extrema_for_ids(table, ids))


@dataclass(frozen=True)
class FeatureMatrix:
    """N x R matrix of scaled features Z; rows are document embeddings."""

    values: np.ndarray
    seed: int
    gamma: float
    d_max: int
    basis_fingerprint: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        bound = 1.0 / math.sqrt(values.shape[1]) if values.shape[1] else 0.0
        if not ((values > 0).all() and (values <= bound).all()):
            raise DataError("feature values must lie in (0, 1/sqrt(R)]")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]


def _feature_raw(vectors: np.ndarray, weights: np.ndarray,
                 word_ids: np.ndarray, omega: RandomDocument, gamma: float,
                 cache: DistanceCache | None) -> float:
    if cache is None:
        cost = _kernels.pairwise_distances(vectors, omega.vectors)
    else:
        cost = cache.lookup_block(word_ids, vectors,
                                  omega.word_ids, omega.vectors)
    objective = solve_transport(weights, omega.weights, cost).objective
    return math.exp(-gamma * objective)


def feature_value(table: EmbeddingTable, x: Document, omega: RandomDocument,
                  gamma: float, cache: DistanceCache | None = None) -> float:
    """exp(-gamma * WMD(x, omega)), in (0, 1]."""
    if not (gamma > 0):
        raise DataError(f"gamma must be positive, got {gamma}")
    vectors = np.ascontiguousarray(table.vectors64[x.word_ids])
    return _feature_raw(vectors, x.weights, x.word_ids, omega, gamma, cache)


def _phi_rows(table: EmbeddingTable, docs: Sequence[Document],
              basis: RandomBasis, cache: DistanceCache | None,
              workers: int) -> np.ndarray:
    """Raw (unscaled) feature matrix phi with one row per document.

    Without a cache, each row's solves run inside one compiled call that
    releases the GIL, so workers scale; with a cache the per-cell path is
    used. Both paths call the same kernels and agree bitwise.
    """
    spec = basis.spec
    v = table.vectors64
    blocks = [np.ascontiguousarray(v[d.word_ids]) for d in docs]
    phi = np.empty((len(docs), spec.r), dtype=np.float64)

    if cache is None:
        omega_vecs = np.ascontiguousarray(
            np.concatenate([o.vectors for o in basis.docs]))
        omega_weights = np.ascontiguousarray(
            np.concatenate([o.weights for o in basis.docs]))
        offsets = np.zeros(spec.r + 1, dtype=np.int64)
        np.cumsum([len(o) for o in basis.docs], out=offsets[1:])

        def fill_row(i: int) -> None:
            objectives = _kernels.wmd_row(blocks[i], docs[i].weights,
                                          omega_vecs, omega_weights, offsets,
                                          PERTURBATION, ENTER_TOL)
            row = phi[i]
            for j in range(spec.r):
                obj = objectives[j]
                if obj < 0.0:
                    raise NumericalError(
                        f"transportation solve failed for document {i}, "
                        f"random document {j + 1}")
                row[j] = math.exp(-spec.gamma * obj)
    else:
        def fill_row(i: int) -> None:
            doc = docs[i]
            vectors = blocks[i]
            row = phi[i]
            for j, omega in enumerate(basis.docs):
                row[j] = _feature_raw(vectors, doc.weights, doc.word_ids,
                                      omega, spec.gamma, cache)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill_row, range(len(docs))))
    else:
        for i in range(len(docs)):
            fill_row(i)
    return phi


def raw_features(table: EmbeddingTable, docs: Sequence[Document],
                 basis: RandomBasis, cache: DistanceCache | None = None,
                 workers: int = 1) -> np.ndarray:
    """Unscaled features phi_j(x_i), one row per document.

    Because random documents are sampled per index, the first R columns
    equal the raw features of the same basis truncated to R; sweeps over
    R reuse one call at the largest value.
    """
    return _phi_rows(table, docs, basis, cache, workers)


def embed_documents(table: EmbeddingTable, docs: Sequence[Document],
                    basis: RandomBasis, cache: DistanceCache | None = None,
                    workers: int = 1) -> np.ndarray:
    """Scaled embedding rows Z = phi / sqrt(R) for a document batch."""
    phi = _phi_rows(table, docs, basis, cache, workers)
    return phi * (1.0 / math.sqrt(basis.spec.r))


def embed_corpus(table: EmbeddingTable, corpus: Corpus,
                 spec: RandomBasisSpec, cache: DistanceCache | None = None,
                 workers: int = 1) -> tuple[RandomBasis, FeatureMatrix]:
    """Materialize the basis and embed every document of the corpus.

    Z[i, j] = phi_j(x_i) / sqrt(R). Output does not depend on `workers`.
    """
    if corpus.source_table_id != table.fingerprint:
        raise DataError("corpus was built against a different table")
    basis = RandomBasis.from_spec(spec)
    values = embed_documents(table, corpus.documents, basis, cache, workers)
    fm = FeatureMatrix(values=values, seed=spec.seed, gamma=spec.gamma,
                       d_max=spec.d_max, basis_fingerprint=basis.fingerprint)
    return basis, fm


def embed_new(table: EmbeddingTable, doc: Document, basis: RandomBasis,
              cache: DistanceCache | None = None) -> np.ndarray:
    """Embed one out-of-sample document with an existing basis."""
    return embed_documents(table, [doc], basis, cache, workers=1)[0]


def approx_kernel(z_x: np.ndarray, z_y: np.ndarray) -> float:
    """Monte-Carlo kernel estimate: the inner product of two embeddings."""
    z_x = np.asarray(z_x, dtype=np.float64)
    z_y = np.asarray(z_y, dtype=np.float64)
    if z_x.shape != z_y.shape or z_x.ndim != 1:
        raise DataError(
            f"feature vectors have mismatched shapes {z_x.shape} vs {z_y.shape}")
    return float(z_x @ z_y)


_HEADER = struct.Struct("<QQQdI")


def write_feature_matrix(path, fm: FeatureMatrix) -> None:
    """Binary format: u64 N, u64 R, u64 seed, f64 gamma, u32 D_max, then
    row-major little-endian f64 values."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(fm.n, fm.r, fm.seed & _MASK64, fm.gamma,
                              fm.d_max))
        fh.write(fm.values.astype("<f8").tobytes())


def read_feature_matrix(path, basis_fingerprint: str = "") -> FeatureMatrix:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError(path, 0, "missing header")
    n, r, seed, gamma, d_max = _HEADER.unpack_from(data)
    expected = _HEADER.size + n * r * 8
    if len(data) != expected:
        raise ParseError(path, _HEADER.size,
                         f"expected {expected} bytes, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8",
                           offset=_HEADER.size).reshape(n, r).copy()
    return FeatureMatrix(values=values, seed=seed, gamma=gamma, d_max=d_max,
                         basis_fingerprint=basis_fingerprint)


def write_feature_matrix_tsv(path, fm: FeatureMatrix) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for row in fm.values:
            fh.write("\t".join(repr(float(v)) for v in row))
            fh.write("\n")


def write_basis_spec(path, spec: RandomBasisSpec) -> None:
    Path(path).write_text(spec.serialize(), encoding="utf-8")


def read_basis_spec(path) -> RandomBasisSpec:
    path = Path(path)
    return RandomBasisSpec.deserialize(path.read_text(encoding="utf-8"),
                                       source=str(path))


__all__ = [
    "FeatureMatrix",
    "RandomBasis",
    "RandomBasisSpec",
    "RandomDocument",
    "approx_kernel",
    "basis_spec_for_corpus",
    "embed_corpus",
    "embed_documents",
    "embed_new",
    "feature_value",
    "mix_seed",
    "raw_features",
    "read_basis_spec",
    "read_feature_matrix",
    "sample_random_document",
    "write_basis_spec",
    "write_feature_matrix",
    "write_feature_matrix_tsv",
]
