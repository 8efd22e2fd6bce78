#!/usr/bin/env python3
"""Full benchmark protocol at published-data scale.

Runs the complete evaluation pipeline on a real dataset: ten-fold
cross-validation over the full hyperparameter grids (gamma, D_max, C),
five seeded 70/30 train/test splits (or a fixed split when a test file
is given), and a final report of mean and standard deviation of the test
accuracy. With --target MEAN STD it states whether the run landed within
MEAN +/- 2 STD.

This is informational tooling: it needs the public 300-d word embeddings
and a benchmark dataset in `label<TAB>text` format, and takes hours at
full grid size. Use --quick for a drastically reduced smoke run.

Example:
    python scripts/reproduce_benchmarks.py \
        --embeddings GoogleNews-vectors-negative300.bin \
        --dataset bbcsport.tsv --stopwords smart_stopwords.txt \
        --target 98.2 0.6
"""

import argparse
import sys
import time

import numpy as np

from wordmovers import corpus as corpus_mod
from wordmovers import learn, wme
from wordmovers.embeddings import load_word2vec_binary

FULL_GAMMAS = (0.01, 0.03, 0.10, 0.14, 0.19, 0.28, 0.39, 0.56, 0.79, 1.0,
               1.12, 1.58, 2.23, 3.16, 4.46, 6.30, 8.91, 10.0)
FULL_D_MAX = (3, 6, 9, 12, 15, 18, 21)
FULL_CS = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 3e2, 5e2, 8e2, 1e3,
           3e3, 5e3, 8e3, 1e4, 3e4, 5e4, 8e4, 1e5, 3e5, 5e5, 8e5, 1e6, 1e7,
           1e8)

QUICK_GAMMAS = (0.1, 1.0)
QUICK_D_MAX = (6,)
QUICK_CS = (1e2, 1e4)


def parse_args(argv):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--embeddings", required=True)
    parser.add_argument("--dataset", required=True)
    parser.add_argument("--test-dataset")
    parser.add_argument("--stopwords")
    parser.add_argument("--weighting", choices=["nbow", "tfidf"],
                        default="nbow")
    parser.add_argument("--min-word-count", type=int, default=1)
    parser.add_argument("--r", type=int, default=4096)
    parser.add_argument("--splits", type=int, default=5)
    parser.add_argument("--folds", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--quick", action="store_true",
                        help="tiny grids and R for a smoke run")
    parser.add_argument("--target", nargs=2, type=float, metavar=("MEAN", "STD"),
                        help="published accuracy (percent) and std to compare")
    return parser.parse_args(argv)


def evaluate_split(table, records, train_idx, test_idx, label_names, args,
                   grid, stopwords):
    train_records = [records[i] for i in train_idx]
    test_records = [records[i] for i in test_idx]
    train_tokens = [corpus_mod.tokenize(rec.text, stopwords)
                    for rec in train_records]
    if args.weighting == "tfidf":
        scheme = corpus_mod.fit_idf(train_tokens)
    else:
        scheme = corpus_mod.WeightScheme.nbow()
    train = corpus_mod.build_corpus(train_records, table, scheme,
                                    stopwords=stopwords,
                                    min_word_count=args.min_word_count,
                                    label_names=label_names)
    test = corpus_mod.build_corpus(test_records, table, scheme,
                                   stopwords=stopwords,
                                   min_word_count=args.min_word_count,
                                   label_names=label_names)

    def embed_fn(corpus_arg, gamma, d_max):
        spec = wme.basis_spec_for_corpus(table, corpus_arg, args.r, d_max,
                                         gamma, args.seed)
        _, fm = wme.embed_corpus(table, corpus_arg, spec,
                                 workers=args.workers)
        return fm.values

    cv = learn.cross_validate(train, grid, embed_fn, seed=args.seed)
    spec = wme.basis_spec_for_corpus(table, train, args.r, cv.d_max,
                                     cv.gamma, args.seed)
    basis, fm = wme.embed_corpus(table, train, spec, workers=args.workers)
    model = learn.train_linear(fm.values, train.labels, cv.reg_c)
    z_test = wme.embed_documents(table, test.documents, basis,
                                 workers=args.workers)
    acc = learn.accuracy(learn.predict_linear(model, z_test), test.labels)
    return acc, cv


def main(argv=None):
    args = parse_args(argv if argv is not None else sys.argv[1:])
    if args.quick:
        gammas, d_maxes, cs = QUICK_GAMMAS, QUICK_D_MAX, QUICK_CS
        args.r = min(args.r, 128)
        args.folds = min(args.folds, 3)
        args.splits = min(args.splits, 1)
    else:
        gammas, d_maxes, cs = FULL_GAMMAS, FULL_D_MAX, FULL_CS
    grid = learn.CvGrid(gammas=gammas, d_maxes=d_maxes, cs=cs,
                        folds=args.folds)

    print(f"loading embeddings from {args.embeddings} ...", flush=True)
    t0 = time.perf_counter()
    table = load_word2vec_binary(args.embeddings)
    print(f"  {len(table)} words, dim {table.dim}, "
          f"{time.perf_counter() - t0:.0f}s")
    stopwords = (corpus_mod.load_stopwords(args.stopwords)
                 if args.stopwords else frozenset())
    records = corpus_mod.read_records(args.dataset)
    label_names = sorted({rec.label for rec in records})

    accuracies = []
    if args.test_dataset:
        test_records = corpus_mod.read_records(args.test_dataset)
        label_names = sorted(set(label_names) |
                             {rec.label for rec in test_records})
        merged = records + test_records
        plan = [(np.arange(len(records)),
                 np.arange(len(records), len(merged)))]
        records = merged
    else:
        plan = []
        for split in range(args.splits):
            rng = np.random.default_rng([args.seed, split])
            order = rng.permutation(len(records))
            cut = int(round(len(records) * 0.7))
            plan.append((np.sort(order[:cut]), np.sort(order[cut:])))

    for split_no, (train_idx, test_idx) in enumerate(plan):
        t0 = time.perf_counter()
        acc, cv = evaluate_split(table, records, train_idx, test_idx,
                                 label_names, args, grid, stopwords)
        accuracies.append(acc)
        print(f"split {split_no}: accuracy {acc * 100:.1f}% "
              f"(gamma={cv.gamma}, D_max={cv.d_max}, C={cv.reg_c}; "
              f"{time.perf_counter() - t0:.0f}s)", flush=True)

    mean = float(np.mean(accuracies)) * 100
    std = (float(np.std(accuracies, ddof=1)) * 100
           if len(accuracies) > 1 else 0.0)
    print(f"accuracy: {mean:.1f} +/- {std:.1f} over {len(accuracies)} split(s)")
    if args.target:
        target_mean, target_std = args.target
        low = target_mean - 2 * target_std
        high = target_mean + 2 * target_std
        verdict = "WITHIN" if low <= mean <= high else "OUTSIDE"
        print(f"target {target_mean:.1f} +/- {target_std:.1f}: "
              f"run is {verdict} mean +/- 2 std [{low:.1f}, {high:.1f}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
