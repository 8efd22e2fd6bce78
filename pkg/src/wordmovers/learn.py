"""Evaluation harness: KNN over distances, a linear classifier over
embeddings, cross-validation, and classification / similarity metrics.

The linear trainer is one-vs-rest L2-regularized logistic regression
minimized by damped Newton iterations from a zero start, run until the
gradient norm drops to 1e-6 or 1000 iterations pass. The loss term is a
mean over samples scaled by C, so duplicating every training point leaves
the optimum unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus, build_document, tokenize
from .embeddings import EmbeddingTable
from .errors import (ConstantInputError, DataError, EmptyDocumentError,
                     NumericalError, ParseError)
from .transport import DistanceCache
from .wme import RandomBasis, embed_new

GRAD_TOL = 1e-6
MAX_EPOCHS = 1000


@dataclass(frozen=True)
class KnnConfig:
    """K for the nearest-neighbor classifier."""

    k: int

    def validated(self, n_train: int) -> "KnnConfig":
        if not (1 <= self.k <= n_train):
            raise DataError(f"k={self.k} outside 1..{n_train}")
        return self


def knn_predict(train_labels: np.ndarray, dist_matrix: np.ndarray,
                k: int) -> np.ndarray:
    """Majority vote among the k nearest training points per row.

    Distance ties are broken by lower training index; vote ties by the
    smaller summed distance within the tied classes, then lower label id.
    """
    train_labels = np.asarray(train_labels, dtype=np.int64)
    dist_matrix = np.asarray(dist_matrix, dtype=np.float64)
    if dist_matrix.ndim != 2 or dist_matrix.shape[1] != train_labels.size:
        raise DataError(
            f"distance matrix {dist_matrix.shape} does not match "
            f"{train_labels.size} training labels")
    if not np.isfinite(dist_matrix).all():
        raise DataError("distance matrix has non-finite entries")
    KnnConfig(k).validated(train_labels.size)

    n_test = dist_matrix.shape[0]
    order_index = np.arange(train_labels.size)
    out = np.empty(n_test, dtype=np.int64)
    for t in range(n_test):
        row = dist_matrix[t]
        order = np.lexsort((order_index, row))[:k]
        votes = train_labels[order]
        counts = np.bincount(votes)
        top = counts.max()
        tied = np.flatnonzero(counts == top)
        if tied.size == 1:
            out[t] = tied[0]
            continue
        sums = np.array([row[order[votes == c]].sum() for c in tied])
        out[t] = tied[np.argmin(sums)]  # argmin keeps the lowest label on ties
    return out


@dataclass
class LinearModel:
    """One-vs-rest linear scores: argmax_c weights[c] @ z + bias[c]."""

    classes: np.ndarray
    weights: np.ndarray
    bias: np.ndarray
    reg_c: float
    meta: dict = field(default_factory=dict)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _train_binary(x: np.ndarray, y: np.ndarray, reg_c: float
                  ) -> tuple[np.ndarray, float, list[float]]:
    """Damped Newton on 0.5 ||w||^2 + C * mean log(1 + exp(-y (xw + b)))."""
    n, dim = x.shape
    theta = np.zeros(dim + 1)
    xa = np.hstack([x, np.ones((n, 1))])

    def objective(th):
        margins = y * (xa @ th)
        return 0.5 * (th[:dim] @ th[:dim]) + \
            reg_c * np.logaddexp(0.0, -margins).mean()

    def gradient(th):
        margins = y * (xa @ th)
        coef = -y * _sigmoid(-margins)
        g = (reg_c / n) * (xa.T @ coef)
        g[:dim] += th[:dim]
        return g

    history = [float(objective(theta))]
    for _ in range(MAX_EPOCHS):
        g = gradient(theta)
        if np.linalg.norm(g) <= GRAD_TOL:
            break
        margins = y * (xa @ theta)
        s = _sigmoid(margins)
        d = s * (1.0 - s)
        h = (reg_c / n) * (xa.T * d) @ xa
        h[np.arange(dim), np.arange(dim)] += 1.0
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular Newton system: {exc}") from exc
        # Armijo backtracking keeps the objective strictly non-increasing.
        current = history[-1]
        slope = g @ step
        alpha = 1.0
        for _ in range(60):
            candidate = theta + alpha * step
            value = float(objective(candidate))
            if value <= current + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            break
        theta = candidate
        history.append(value)
    return theta[:dim], float(theta[dim]), history


def train_linear(z: np.ndarray, labels: np.ndarray, reg_c: float,
                 meta: dict | None = None) -> LinearModel:
    """Fit one-vs-rest L2-regularized logistic regression.

    Deterministic: zero initialization, no randomness. Requires at least
    two samples and two distinct classes.
    """
    z = np.asarray(z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or z.shape[0] != labels.size:
        raise DataError("features and labels do not align")
    if z.shape[0] < 2:
        raise DataError("need at least two training samples")
    if not (reg_c > 0 and math.isfinite(reg_c)):
        raise DataError(f"regularization constant must be positive, got {reg_c}")
    classes = np.unique(labels)
    if classes.size < 2:
        raise DataError("training data contains a single class")

    weights = np.empty((classes.size, z.shape[1]))
    bias = np.empty(classes.size)
    histories = []
    for c_idx, cls in enumerate(classes):
        y = np.where(labels == cls, 1.0, -1.0)
        w, b, history = _train_binary(z, y, reg_c)
        weights[c_idx] = w
        bias[c_idx] = b
        histories.append(history)
    out_meta = dict(meta or {})
    out_meta["objective_history"] = histories
    return LinearModel(classes=classes, weights=weights, bias=bias,
                       reg_c=reg_c, meta=out_meta)


def predict_linear(model: LinearModel, z: np.ndarray) -> np.ndarray:
    """Argmax class score per row; ties go to the lower label id."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z.reshape(1, -1)
    if z.shape[1] != model.weights.shape[1]:
        raise DataError(
            f"feature length {z.shape[1]} does not match model "
            f"({model.weights.shape[1]})")
    scores = z @ model.weights.T + model.bias
    return model.classes[np.argmax(scores, axis=1)]


def accuracy(predicted: np.ndarray, gold: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    gold = np.asarray(gold)
    return float((predicted == gold).mean())


def per_class_accuracy(predicted: np.ndarray, gold: np.ndarray,
                       label_names: Sequence[str]) -> dict[str, float]:
    out = {}
    for cls, name in enumerate(label_names):
        mask = gold == cls
        if mask.any():
            out[name] = float((predicted[mask] == cls).mean())
    return out


def stratified_folds(labels: np.ndarray, folds: int,
                     seed: int) -> tuple[list[np.ndarray], int]:
    """Seeded stratified fold assignment.

    Returns (fold index arrays, folds actually used); the count is
    reduced when the rarest class has fewer members than `folds`.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if folds < 2:
        raise DataError(f"need at least 2 folds, got {folds}")
    if folds > labels.size:
        raise DataError(f"{folds} folds for {labels.size} samples")
    counts = np.bincount(labels)
    min_count = counts[counts > 0].min()
    effective = max(2, min(folds, int(min_count)))
    rng = np.random.default_rng(seed)
    assignment = np.empty(labels.size, dtype=np.int64)
    for cls in np.flatnonzero(counts > 0):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % effective
    return [np.flatnonzero(assignment == f) for f in range(effective)], effective


@dataclass(frozen=True)
class CvGrid:
    """Hyperparameter axes for cross-validation."""

    gammas: tuple[float, ...]
    d_maxes: tuple[int, ...]
    cs: tuple[float, ...]
    folds: int = 10

    def __post_init__(self):
        if not (self.gammas and self.d_maxes and self.cs):
            raise DataError("grid axes must be non-empty")
        if self.folds < 2:
            raise DataError("fold count must be >= 2")


@dataclass
class CvResult:
    gamma: float
    d_max: int
    reg_c: float
    mean_score: float
    fold_scores: list[float]
    folds_used: int
    all_scores: dict


def cross_validate(corpus: Corpus, grid: CvGrid,
                   embed_fn: Callable[[Corpus, float, int], np.ndarray],
                   seed: int = 0) -> CvResult:
    """Pick (gamma, d_max, C) maximizing mean stratified-fold accuracy.

    `embed_fn(corpus, gamma, d_max)` returns the feature rows for the
    whole corpus; the embedding is unsupervised, so it is computed once
    per (gamma, d_max) and the folds slice its rows. Score ties prefer
    smaller d_max, then smaller gamma, then smaller C.
    """
    labels = corpus.labels
    folds, effective = stratified_folds(labels, grid.folds, seed)
    all_scores: dict = {}
    candidates = []
    for d_max in grid.d_maxes:
        for gamma in grid.gammas:
            z = embed_fn(corpus, gamma, d_max)
            for reg_c in grid.cs:
                scores = []
                for f in range(effective):
                    val_idx = folds[f]
                    train_idx = np.concatenate(
                        [folds[g] for g in range(effective) if g != f])
                    if np.unique(labels[train_idx]).size < 2:
                        raise DataError(
                            "a training fold degenerated to one class")
                    model = train_linear(z[train_idx], labels[train_idx],
                                         reg_c)
                    pred = predict_linear(model, z[val_idx])
                    scores.append(accuracy(pred, labels[val_idx]))
                mean = float(np.mean(scores))
                all_scores[(gamma, d_max, reg_c)] = mean
                candidates.append((-mean, d_max, gamma, reg_c, scores))
    candidates.sort(key=lambda c: c[:4])
    neg_mean, d_max, gamma, reg_c, scores = candidates[0]
    return CvResult(gamma=gamma, d_max=d_max, reg_c=reg_c,
                    mean_score=-neg_mean, fold_scores=list(scores),
                    folds_used=effective, all_scores=all_scores)


def pearson(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Sample Pearson correlation; constant input is an error."""
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(gold, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise DataError("need at least two points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = xc @ xc
    sy = yc @ yc
    if sx == 0.0 or sy == 0.0:
        raise ConstantInputError("correlation undefined for constant input")
    r = (xc @ yc) / math.sqrt(sx * sy)
    return float(min(1.0, max(-1.0, r)))


@dataclass
class StsResult:
    scores: np.ndarray
    gold: np.ndarray
    kept: list[int]
    skipped: list[int]


def sts_score(table: EmbeddingTable, sentence_pairs: Sequence[tuple[str, str]],
              basis: RandomBasis, scheme, stopwords=(),
              gold: Sequence[float] | None = None,
              raw_kernel: bool = False,
              cache: DistanceCache | None = None) -> StsResult:
    """Similarity of each sentence pair under the embedding.

    Default score is the cosine of the two embedding vectors; with
    `raw_kernel` it is the plain inner product. Pairs with a side that
    has no in-vocabulary token are skipped and reported.
    """
    scores = []
    kept_gold = []
    kept: list[int] = []
    skipped: list[int] = []
    gold_arr = None if gold is None else np.asarray(gold, dtype=np.float64)
    for idx, (first, second) in enumerate(sentence_pairs):
        try:
            doc_a = build_document(tokenize(first, stopwords), table, scheme)
            doc_b = build_document(tokenize(second, stopwords), table, scheme)
        except EmptyDocumentError:
            skipped.append(idx)
            continue
        z_a = embed_new(table, doc_a, basis, cache)
        z_b = embed_new(table, doc_b, basis, cache)
        value = float(z_a @ z_b)
        if not raw_kernel:
            value /= math.sqrt((z_a @ z_a) * (z_b @ z_b))
        scores.append(value)
        kept.append(idx)
        if gold_arr is not None:
            kept_gold.append(gold_arr[idx])
    if not scores:
        raise DataError("every sentence pair had an empty side")
    return StsResult(scores=np.array(scores),
                     gold=np.array(kept_gold) if gold is not None else np.array([]),
                     kept=kept, skipped=skipped)


def read_sts_file(path) -> tuple[list[float], list[tuple[str, str]]]:
    """Read `score<TAB>sentence1<TAB>sentence2` lines."""
    path = Path(path)
    golds = []
    pairs = []
    for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(path, lineno, "expected score<TAB>s1<TAB>s2")
        try:
            golds.append(float(parts[0]))
        except ValueError:
            raise ParseError(path, lineno, f"bad score {parts[0]!r}") from None
        pairs.append((parts[1], parts[2]))
    if not pairs:
        raise DataError(f"{path}: no sentence pairs")
    return golds, pairs


@dataclass
class EvalReport:
    """Accuracy plus timing for one train/evaluate run."""

    accuracy: float
    per_class: dict[str, float]
    train_seconds: float
    test_seconds: float
    hyperparameters: dict

    def __post_init__(self):
        if not (0.0 <= self.accuracy <= 1.0):
            raise DataError(f"accuracy {self.accuracy} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps({
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "train_seconds": self.train_seconds,
            "test_seconds": self.test_seconds,
            "hyperparameters": self.hyperparameters,
        }, sort_keys=True, indent=2) + "\n"

    def to_tsv_line(self) -> str:
        hp = ",".join(f"{k}={self.hyperparameters[k]}"
                      for k in sorted(self.hyperparameters))
        return (f"{self.accuracy!r}\t{self.train_seconds!r}\t"
                f"{self.test_seconds!r}\t{hp}\n")


__all__ = [
    "CvGrid",
    "CvResult",
    "EvalReport",
    "KnnConfig",
    "LinearModel",
    "StsResult",
    "accuracy",
    "cross_validate",
    "knn_predict",
    "pearson",
    "per_class_accuracy",
    "predict_linear",
    "read_sts_file",
    "sts_score",
    "stratified_folds",
    "train_linear",
]
