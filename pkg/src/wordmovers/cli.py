"""Command-line pipeline: `wordmovers <subcommand> [flags]`.

Subcommands: wmd, embed, knn, train-eval, sweep, sts. Every flag mirrors
a RunConfig field in kebab-case; values resolve as command-line flag over
config-file key over built-in default. The config file is flat
`key=value` text (either kebab- or snake-case keys). `--print-config`
dumps the resolved configuration before running.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Data artifacts are byte-identical across runs and worker counts
for a fixed seed; wall-clock timings go to `timing.json` and the timing
fields of reports, which are the only non-reproducible outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import learn, transport, wme
from .embeddings import load_text_embeddings, load_word2vec_binary
from .errors import ConfigError, DataError, NumericalError, WordMoversError

DEFAULT_K_GRID = tuple(range(1, 22))


@dataclass
class RunConfig:
    embeddings: str | None = None
    embeddings_format: str = "word2vec-bin"
    normalize_embeddings: bool = False
    dataset: str | None = None
    test_dataset: str | None = None
    stopwords: str | None = None
    output_dir: str = "."
    weighting: str = "nbow"
    min_word_count: int = 1
    r: int = 128
    d_max: int = 6
    gamma: float = 1.0
    seed: int = 0
    center_mean: bool = False
    basis: str | None = None
    reg_c: float = 1.0
    folds: int = 10
    gamma_grid: str | None = None
    d_max_grid: str | None = None
    # Desk-scale truncation of the usual C search range.
    c_grid: str | None = "0.001,0.1,10.0,1000.0,100000.0"
    k_grid: str | None = None
    splits: int = 1
    split_ratio: float = 0.7
    workers: int | None = None
    precompute: bool = False
    sweep_param: str = "r"
    sweep_values: str = "4,16,64,256,1024"
    raw_kernel: bool = False
    sts_files: str | None = None
    print_config: bool = False

    def validate(self, command: str) -> None:
        needs_dataset = command in ("wmd", "embed", "knn", "train-eval", "sweep")
        if self.embeddings is None:
            raise ConfigError("--embeddings is required")
        if not Path(self.embeddings).exists():
            raise ConfigError(f"embeddings file not found: {self.embeddings}")
        if needs_dataset:
            if self.dataset is None:
                raise ConfigError("--dataset is required")
            if not Path(self.dataset).exists():
                raise ConfigError(f"dataset file not found: {self.dataset}")
        if command == "sts":
            if not self.sts_files:
                raise ConfigError("--sts-files is required")
            for name in self.sts_files.split(","):
                if not Path(name).exists():
                    raise ConfigError(f"sts file not found: {name}")
        if self.test_dataset is not None and not Path(self.test_dataset).exists():
            raise ConfigError(f"test dataset not found: {self.test_dataset}")
        if self.stopwords is not None and not Path(self.stopwords).exists():
            raise ConfigError(f"stopword file not found: {self.stopwords}")
        if self.basis is not None and not Path(self.basis).exists():
            raise ConfigError(f"basis file not found: {self.basis}")
        if self.embeddings_format not in ("word2vec-bin", "text"):
            raise ConfigError(f"unknown embeddings format {self.embeddings_format!r}")
        if self.weighting not in ("nbow", "tfidf"):
            raise ConfigError(f"unknown weighting {self.weighting!r}")
        if self.r < 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if self.d_max < 1:
            raise ConfigError(f"d-max must be >= 1, got {self.d_max}")
        if not self.gamma > 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not self.reg_c > 0:
            raise ConfigError(f"reg-c must be positive, got {self.reg_c}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.splits < 1:
            raise ConfigError(f"splits must be >= 1, got {self.splits}")
        if not (0.0 < self.split_ratio < 1.0):
            raise ConfigError(f"split-ratio must be in (0, 1), got {self.split_ratio}")
        if self.min_word_count < 1:
            raise ConfigError("min-word-count must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.sweep_param not in ("r", "d-max"):
            raise ConfigError(f"sweep-param must be r or d-max, got {self.sweep_param}")


_BOOL_FIELDS = {"normalize_embeddings", "center_mean", "precompute",
                "raw_kernel", "print_config"}


def _parse_config_file(path: str) -> dict:
    values: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    valid = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in valid:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def _coerce(name: str, value, target_type) -> object:
    if value is None or not isinstance(value, str):
        return value
    if name in _BOOL_FIELDS:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {name}: {value!r}")
    try:
        if target_type is int:
            return int(value)
        if target_type is float:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {value!r}") from None
    return value


_FIELD_TYPES = {"min_word_count": int, "r": int, "d_max": int, "seed": int,
                "folds": int, "splits": int, "workers": int,
                "gamma": float, "reg_c": float, "split_ratio": float}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config-file keys, and explicit flags, in that order."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, raw in _parse_config_file(args.config).items():
            setattr(cfg, key, _coerce(key, raw, _FIELD_TYPES.get(key, str)))
    for f in fields(RunConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            setattr(cfg, f.name, flag_value)
    if cfg.workers is None:
        env = os.environ.get("WME_WORKERS")
        if env:
            cfg.workers = _coerce("workers", env, int)
        else:
            cfg.workers = os.cpu_count() or 1
    return cfg


def _print_config(cfg: RunConfig) -> None:
    for f in fields(RunConfig):
        if f.name == "print_config":
            continue
        print(f"{f.name.replace('_', '-')}={getattr(cfg, f.name)}")


def _parse_float_list(text: str, what: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}") from None
    if not values:
        raise ConfigError(f"empty {what} list")
    return values


def _parse_int_list(text: str, what: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad {what} list: {text!r}") from None
    if not values:
        raise ConfigError(f"empty {what} list")
    return values


def _load_table(cfg: RunConfig):
    if cfg.embeddings_format == "word2vec-bin":
        return load_word2vec_binary(cfg.embeddings,
                                    normalize=cfg.normalize_embeddings)
    return load_text_embeddings(cfg.embeddings,
                                normalize=cfg.normalize_embeddings)


def _load_stopwords(cfg: RunConfig) -> frozenset[str]:
    if cfg.stopwords is None:
        return frozenset()
    return corpus_mod.load_stopwords(cfg.stopwords)


def _scheme_for(records_tokens: list[list[str]], cfg: RunConfig):
    if cfg.weighting == "nbow":
        return corpus_mod.WeightScheme.nbow()
    return corpus_mod.fit_idf(records_tokens)


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _split_indices(n: int, ratio: float, seed: int,
                   split: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, split])
    order = rng.permutation(n)
    cut = int(round(n * ratio))
    if cut < 1 or cut >= n:
        raise DataError(f"split ratio {ratio} leaves an empty side for n={n}")
    return np.sort(order[:cut]), np.sort(order[cut:])


def _corpora_for_split(records, train_idx, test_idx, table, cfg,
                       stopwords, label_names):
    train_records = [records[i] for i in train_idx]
    test_records = [records[i] for i in test_idx]
    train_tokens = [corpus_mod.tokenize(r.text, stopwords)
                    for r in train_records]
    scheme = _scheme_for(train_tokens, cfg)
    train = corpus_mod.build_corpus(train_records, table, scheme,
                                    stopwords=stopwords,
                                    min_word_count=cfg.min_word_count,
                                    label_names=label_names)
    test = corpus_mod.build_corpus(test_records, table, scheme,
                                   stopwords=stopwords,
                                   min_word_count=cfg.min_word_count,
                                   label_names=label_names)
    return train, test, scheme


def _grid_from(cfg: RunConfig) -> learn.CvGrid:
    gammas = (_parse_float_list(cfg.gamma_grid, "gamma")
              if cfg.gamma_grid else (cfg.gamma,))
    d_maxes = (_parse_int_list(cfg.d_max_grid, "d-max")
               if cfg.d_max_grid else (cfg.d_max,))
    cs = (_parse_float_list(cfg.c_grid, "C")
          if cfg.c_grid else (cfg.reg_c,))
    return learn.CvGrid(gammas=gammas, d_maxes=d_maxes, cs=cs,
                        folds=cfg.folds)


def cmd_wmd(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    table = _load_table(cfg)
    stopwords = _load_stopwords(cfg)
    records = corpus_mod.read_records(cfg.dataset)
    tokens = [corpus_mod.tokenize(r.text, stopwords) for r in records]
    scheme = _scheme_for(tokens, cfg)
    corp = corpus_mod.build_corpus(records, table, scheme,
                                   stopwords=stopwords,
                                   min_word_count=cfg.min_word_count)
    load_seconds = time.perf_counter() - t0

    cache = transport.DistanceCache() if cfg.precompute else None
    t1 = time.perf_counter()
    matrix = transport.wmd_pairwise(table, corp, corp, cache=cache,
                                    workers=cfg.workers)
    compute_seconds = time.perf_counter() - t1

    transport.write_distance_matrix(out / "distances.bin", matrix)
    transport.write_distance_matrix_tsv(out / "distances.tsv", matrix)
    timing = {
        "load_seconds": load_seconds,
        "compute_seconds": compute_seconds,
        "documents": len(corp),
        "dropped_records": corp.dropped,
        "precompute": cfg.precompute,
        "cache_hits": cache.hits if cache else 0,
        "cache_misses": cache.misses if cache else 0,
    }
    _write_json(out / "timing.json", timing)
    print(f"wrote {len(corp)}x{len(corp)} distance matrix to "
          f"{out / 'distances.bin'} in {compute_seconds:.2f}s "
          f"(cache hits {timing['cache_hits']})")
    return 0


def cmd_embed(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    table = _load_table(cfg)
    stopwords = _load_stopwords(cfg)
    records = corpus_mod.read_records(cfg.dataset)
    tokens = [corpus_mod.tokenize(r.text, stopwords) for r in records]
    scheme = _scheme_for(tokens, cfg)
    corp = corpus_mod.build_corpus(records, table, scheme,
                                   stopwords=stopwords,
                                   min_word_count=cfg.min_word_count)
    load_seconds = time.perf_counter() - t0

    if cfg.basis is not None:
        # Reuse a saved basis so new documents land in the same feature
        # space as a previous run.
        spec = wme.read_basis_spec(cfg.basis)
        if spec.dim != table.dim:
            raise DataError(
                f"basis dimension {spec.dim} does not match table "
                f"dimension {table.dim}")
    else:
        spec = wme.basis_spec_for_corpus(table, corp, cfg.r, cfg.d_max,
                                         cfg.gamma, cfg.seed,
                                         center_mean=cfg.center_mean)
    cache = transport.DistanceCache() if cfg.precompute else None
    t1 = time.perf_counter()
    basis, fm = wme.embed_corpus(table, corp, spec, cache=cache,
                                 workers=cfg.workers)
    compute_seconds = time.perf_counter() - t1

    wme.write_feature_matrix(out / "features.bin", fm)
    wme.write_feature_matrix_tsv(out / "features.tsv", fm)
    wme.write_basis_spec(out / "basis.txt", spec)
    _write_json(out / "timing.json", {
        "load_seconds": load_seconds,
        "compute_seconds": compute_seconds,
        "documents": len(corp),
        "dropped_records": corp.dropped,
        "r": spec.r,
        "cache_hits": cache.hits if cache else 0,
        "cache_misses": cache.misses if cache else 0,
    })
    print(f"wrote {fm.n}x{fm.r} feature matrix to {out / 'features.bin'} "
          f"in {compute_seconds:.2f}s")
    return 0


def _aggregate_reports(reports: list[learn.EvalReport]) -> dict:
    accs = [r.accuracy for r in reports]
    mean = float(np.mean(accs))
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    return {
        "splits": [json.loads(r.to_json()) for r in reports],
        "accuracies": accs,
        "mean_accuracy": mean,
        "std_accuracy": std,
    }


def cmd_train_eval(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    table = _load_table(cfg)
    stopwords = _load_stopwords(cfg)
    records = corpus_mod.read_records(cfg.dataset)
    label_names = sorted({r.label for r in records})
    grid = _grid_from(cfg)

    if cfg.test_dataset is not None:
        test_records = corpus_mod.read_records(cfg.test_dataset)
        label_names = sorted(set(label_names) |
                             {r.label for r in test_records})
        all_records = records + test_records
        plan = [(np.arange(len(records)),
                 np.arange(len(records), len(all_records)))]
    else:
        all_records = records
        plan = [_split_indices(len(records), cfg.split_ratio, cfg.seed, s)
                for s in range(cfg.splits)]

    reports = []
    for split_no, (train_idx, test_idx) in enumerate(plan):
        train, test, scheme = _corpora_for_split(
            all_records, train_idx, test_idx, table, cfg, stopwords,
            label_names)

        cache = transport.DistanceCache() if cfg.precompute else None

        def embed_fn(c, gamma, d_max):
            spec = wme.basis_spec_for_corpus(table, c, cfg.r, d_max, gamma,
                                             cfg.seed,
                                             center_mean=cfg.center_mean)
            _, fm = wme.embed_corpus(table, c, spec, cache=cache,
                                     workers=cfg.workers)
            return fm.values

        t0 = time.perf_counter()
        cv = learn.cross_validate(train, grid, embed_fn, seed=cfg.seed)
        spec = wme.basis_spec_for_corpus(table, train, cfg.r, cv.d_max,
                                         cv.gamma, cfg.seed,
                                         center_mean=cfg.center_mean)
        basis, fm = wme.embed_corpus(table, train, spec, cache=cache,
                                     workers=cfg.workers)
        model = learn.train_linear(fm.values, train.labels, cv.reg_c,
                                   meta={"gamma": cv.gamma,
                                         "d_max": cv.d_max,
                                         "seed": cfg.seed})
        train_seconds = time.perf_counter() - t0

        t1 = time.perf_counter()
        z_test = wme.embed_documents(table, test.documents, basis,
                                     cache=cache, workers=cfg.workers)
        predicted = learn.predict_linear(model, z_test)
        test_seconds = time.perf_counter() - t1

        report = learn.EvalReport(
            accuracy=learn.accuracy(predicted, test.labels),
            per_class=learn.per_class_accuracy(predicted, test.labels,
                                               label_names),
            train_seconds=train_seconds,
            test_seconds=test_seconds,
            hyperparameters={"gamma": cv.gamma, "d_max": cv.d_max,
                             "C": cv.reg_c, "r": cfg.r, "seed": cfg.seed,
                             "split": split_no,
                             "cv_score": cv.mean_score,
                             "folds_used": cv.folds_used},
        )
        reports.append(report)
        print(f"split {split_no}: accuracy {report.accuracy:.4f} "
              f"(gamma={cv.gamma}, d_max={cv.d_max}, C={cv.reg_c})")

    payload = _aggregate_reports(reports)
    _write_json(out / "report.json", payload)
    with (out / "report.tsv").open("w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(report.to_tsv_line())
    print(f"mean accuracy {payload['mean_accuracy']:.4f} "
          f"± {payload['std_accuracy']:.4f} over {len(reports)} split(s)")
    return 0


def _knn_cv_best_k(train_matrix: np.ndarray, labels: np.ndarray,
                   k_grid: tuple[int, ...], folds: int,
                   seed: int) -> tuple[int, float]:
    fold_sets, effective = learn.stratified_folds(labels, folds, seed)
    best = None
    for k in k_grid:
        scores = []
        for f in range(effective):
            val_idx = fold_sets[f]
            train_idx = np.concatenate(
                [fold_sets[g] for g in range(effective) if g != f])
            if k > train_idx.size:
                continue
            sub = train_matrix[np.ix_(val_idx, train_idx)]
            pred = learn.knn_predict(labels[train_idx], sub, k)
            scores.append(learn.accuracy(pred, labels[val_idx]))
        if not scores:
            continue
        mean = float(np.mean(scores))
        key = (-mean, k)
        if best is None or key < best[0]:
            best = (key, k, mean)
    if best is None:
        raise DataError("no k in the grid fits the training folds")
    return best[1], best[2]


def cmd_knn(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    table = _load_table(cfg)
    stopwords = _load_stopwords(cfg)
    records = corpus_mod.read_records(cfg.dataset)
    label_names = sorted({r.label for r in records})
    k_grid = (_parse_int_list(cfg.k_grid, "k") if cfg.k_grid
              else DEFAULT_K_GRID)

    reports = []
    for split_no in range(cfg.splits):
        train_idx, test_idx = _split_indices(len(records), cfg.split_ratio,
                                             cfg.seed, split_no)
        train, test, _ = _corpora_for_split(records, train_idx, test_idx,
                                            table, cfg, stopwords,
                                            label_names)
        cache = transport.DistanceCache() if cfg.precompute else None

        t0 = time.perf_counter()
        train_matrix = transport.wmd_pairwise(table, train, train,
                                              cache=cache,
                                              workers=cfg.workers)
        k_grid_fit = tuple(k for k in k_grid if k <= len(train) - 1)
        if not k_grid_fit:
            raise DataError("k grid exceeds training size")
        best_k, cv_score = _knn_cv_best_k(train_matrix, train.labels,
                                          k_grid_fit, cfg.folds, cfg.seed)
        train_seconds = time.perf_counter() - t0

        t1 = time.perf_counter()
        test_matrix = transport.wmd_pairwise(table, test, train,
                                             cache=cache,
                                             workers=cfg.workers)
        predicted = learn.knn_predict(train.labels, test_matrix, best_k)
        test_seconds = time.perf_counter() - t1

        transport.write_distance_matrix(
            out / f"distances_test_train_{split_no}.bin", test_matrix)
        report = learn.EvalReport(
            accuracy=learn.accuracy(predicted, test.labels),
            per_class=learn.per_class_accuracy(predicted, test.labels,
                                               label_names),
            train_seconds=train_seconds,
            test_seconds=test_seconds,
            hyperparameters={"k": best_k, "cv_score": cv_score,
                             "seed": cfg.seed, "split": split_no},
        )
        reports.append(report)
        print(f"split {split_no}: knn accuracy {report.accuracy:.4f} "
              f"(k={best_k})")

    payload = _aggregate_reports(reports)
    _write_json(out / "report.json", payload)
    print(f"mean accuracy {payload['mean_accuracy']:.4f} "
          f"± {payload['std_accuracy']:.4f} over {len(reports)} split(s)")
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    table = _load_table(cfg)
    stopwords = _load_stopwords(cfg)
    records = corpus_mod.read_records(cfg.dataset)
    label_names = sorted({r.label for r in records})
    values = _parse_int_list(cfg.sweep_values, "sweep")
    train_idx, test_idx = _split_indices(len(records), cfg.split_ratio,
                                         cfg.seed, 0)
    train, test, _ = _corpora_for_split(records, train_idx, test_idx, table,
                                        cfg, stopwords, label_names)
    cache = transport.DistanceCache() if cfg.precompute else None

    rows = []
    if cfg.sweep_param == "r":
        r_max = max(values)
        spec = wme.basis_spec_for_corpus(table, train, r_max, cfg.d_max,
                                         cfg.gamma, cfg.seed,
                                         center_mean=cfg.center_mean)
        basis = wme.RandomBasis.from_spec(spec)
        phi_train = wme.raw_features(table, train.documents, basis,
                                     cache=cache, workers=cfg.workers)
        phi_test = wme.raw_features(table, test.documents, basis,
                                    cache=cache, workers=cfg.workers)
        for value in values:
            scale = 1.0 / np.sqrt(value)
            z_train = phi_train[:, :value] * scale
            z_test = phi_test[:, :value] * scale
            model = learn.train_linear(z_train, train.labels, cfg.reg_c)
            train_acc = learn.accuracy(
                learn.predict_linear(model, z_train), train.labels)
            test_acc = learn.accuracy(
                learn.predict_linear(model, z_test), test.labels)
            rows.append((value, train_acc, test_acc))
    else:
        for value in values:
            spec = wme.basis_spec_for_corpus(table, train, cfg.r, value,
                                             cfg.gamma, cfg.seed,
                                             center_mean=cfg.center_mean)
            basis, fm = wme.embed_corpus(table, train, spec, cache=cache,
                                         workers=cfg.workers)
            z_test = wme.embed_documents(table, test.documents, basis,
                                         cache=cache, workers=cfg.workers)
            model = learn.train_linear(fm.values, train.labels, cfg.reg_c)
            train_acc = learn.accuracy(
                learn.predict_linear(model, fm.values), train.labels)
            test_acc = learn.accuracy(
                learn.predict_linear(model, z_test), test.labels)
            rows.append((value, train_acc, test_acc))

    sweep_path = out / "sweep.tsv"
    with sweep_path.open("w", encoding="utf-8") as fh:
        fh.write(f"{cfg.sweep_param}\ttrain_accuracy\ttest_accuracy\n")
        for value, train_acc, test_acc in rows:
            fh.write(f"{value}\t{train_acc!r}\t{test_acc!r}\n")
    for value, train_acc, test_acc in rows:
        print(f"{cfg.sweep_param}={value}: train {train_acc:.4f} "
              f"test {test_acc:.4f}")
    print(f"wrote {sweep_path}")
    return 0


def cmd_sts(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    table = _load_table(cfg)
    stopwords = _load_stopwords(cfg)
    file_results: dict[str, dict] = {}
    pearson_values = []
    for name in cfg.sts_files.split(","):
        golds, pairs = learn.read_sts_file(name)
        sentences = [s for pair in pairs for s in pair]
        tokenized = [corpus_mod.tokenize(s, stopwords) for s in sentences]
        scheme = _scheme_for(tokenized, cfg)

        docs = []
        for tokens in tokenized:
            try:
                docs.append(corpus_mod.build_document(tokens, table, scheme))
            except WordMoversError:
                continue
        if not docs:
            file_results[name] = {"error": "no in-vocabulary sentence"}
            continue
        pseudo = corpus_mod.Corpus(documents=docs,
                                   labels=np.zeros(len(docs), dtype=np.int64),
                                   label_names=["_"],
                                   source_table_id=table.fingerprint)
        spec = wme.basis_spec_for_corpus(table, pseudo, cfg.r, cfg.d_max,
                                         cfg.gamma, cfg.seed,
                                         center_mean=cfg.center_mean)
        basis = wme.RandomBasis.from_spec(spec)
        cache = transport.DistanceCache() if cfg.precompute else None
        result = learn.sts_score(table, pairs, basis, scheme,
                                 stopwords=stopwords, gold=golds,
                                 raw_kernel=cfg.raw_kernel, cache=cache)
        try:
            score = learn.pearson(result.scores, result.gold)
        except WordMoversError as exc:
            file_results[name] = {"error": f"constant input: {exc}",
                                  "pairs_scored": len(result.kept),
                                  "pairs_skipped": len(result.skipped)}
            continue
        file_results[name] = {"pearson": score,
                              "pairs_scored": len(result.kept),
                              "pairs_skipped": len(result.skipped)}
        pearson_values.append(score)
        print(f"{name}: pearson {score:.4f} ({len(result.kept)} pairs)")

    payload = {"files": file_results}
    if pearson_values:
        payload["average_pearson"] = float(np.mean(pearson_values))
    _write_json(out / "sts_report.json", payload)
    if not pearson_values:
        print("no file produced a defined correlation", file=sys.stderr)
        return 3
    print(f"average pearson {payload['average_pearson']:.4f} over "
          f"{len(pearson_values)} file(s)")
    return 0


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--embeddings")
    parser.add_argument("--embeddings-format",
                        choices=["word2vec-bin", "text"], dest="embeddings_format")
    parser.add_argument("--normalize-embeddings", action="store_const",
                        const=True, dest="normalize_embeddings")
    parser.add_argument("--dataset")
    parser.add_argument("--test-dataset", dest="test_dataset")
    parser.add_argument("--stopwords")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--weighting", choices=["nbow", "tfidf"])
    parser.add_argument("--min-word-count", type=int, dest="min_word_count")
    parser.add_argument("--r", type=int)
    parser.add_argument("--d-max", type=int, dest="d_max")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--center-mean", action="store_const", const=True,
                        dest="center_mean")
    parser.add_argument("--basis")
    parser.add_argument("--reg-c", type=float, dest="reg_c")
    parser.add_argument("--folds", type=int)
    parser.add_argument("--gamma-grid", dest="gamma_grid")
    parser.add_argument("--d-max-grid", dest="d_max_grid")
    parser.add_argument("--c-grid", dest="c_grid")
    parser.add_argument("--k-grid", dest="k_grid")
    parser.add_argument("--splits", type=int)
    parser.add_argument("--split-ratio", type=float, dest="split_ratio")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--precompute", action="store_const", const=True)
    parser.add_argument("--sweep-param", choices=["r", "d-max"],
                        dest="sweep_param")
    parser.add_argument("--sweep-values", dest="sweep_values")
    parser.add_argument("--raw-kernel", action="store_const", const=True,
                        dest="raw_kernel")
    parser.add_argument("--sts-files", dest="sts_files")
    parser.add_argument("--print-config", action="store_const", const=True,
                        dest="print_config")


_COMMANDS = {
    "wmd": cmd_wmd,
    "embed": cmd_embed,
    "knn": cmd_knn,
    "train-eval": cmd_train_eval,
    "sweep": cmd_sweep,
    "sts": cmd_sts,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wordmovers",
        description="Word Mover's Distance and document embedding pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        child = sub.add_parser(name)
        _add_common_flags(child)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg.validate(args.command)
        if cfg.print_config:
            _print_config(cfg)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
