"""Command-line pipeline: vocab -> contexts -> learn -> induce -> evaluate.

Every subcommand is deterministic given its inputs, flags, and seed; the
--threads flag only controls shard parallelism and never changes output
bytes. Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

from . import classify as classify_mod
from . import context as context_mod
from . import corpus as corpus_mod
from . import docembed as docembed_mod
from . import embedstore as embedstore_mod
from . import evaluation as eval_mod
from . import transform as transform_mod
from .errors import CtxvecError

log = logging.getLogger("ctxvec")

DEFAULT_MIN_COUNT = 100
DEFAULT_TAU = 1000


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract reserves 2 for
    # internal failures and 1 for user errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ctxvec",
        description="Induce embeddings for rare words, n-grams, and annotated "
        "features from corpus contexts via a learned linear transform.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for shard-parallel steps")
    kwargs = dict(parents=[common], formatter_class=argparse.ArgumentDefaultsHelpFormatter)

    p = sub.add_parser("vocab", help="count tokens and write a vocabulary TSV", **kwargs)
    p.add_argument("--corpus", required=True, help="text corpus, one context per line")
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT,
                   help="keep tokens occurring at least this often")
    p.add_argument("--out", required=True, help="output vocabulary TSV")
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("contexts", help="build additive context embeddings", **kwargs)
    p.add_argument("--corpus", help="text corpus (word and n-gram modes)")
    p.add_argument("--vectors", required=True, help="pretrained word embeddings")
    p.add_argument("--vocab", help="vocabulary TSV (word and n-gram modes)")
    p.add_argument("--ngrams", type=int, default=1, help="n-gram order; 1 = words")
    p.add_argument("--min-ngram-count", type=int, default=1,
                   help="drop n-grams occurring fewer times")
    p.add_argument("--feature-contexts",
                   help="annotated contexts TSV (key<TAB>text); replaces corpus scan")
    p.add_argument("--window", type=int, default=corpus_mod.DEFAULT_WINDOW_SIZE,
                   help="max context tokens per side")
    p.add_argument("--include-target", action="store_true",
                   help="include the target span in its own context sum")
    p.add_argument("--out", required=True, help="output embedding file")
    p.set_defaults(func=cmd_contexts)

    p = sub.add_parser("learn", help="fit the context-to-feature transform", **kwargs)
    p.add_argument("--vectors", required=True, help="pretrained word embeddings")
    p.add_argument("--contexts", required=True, help="context embeddings from `contexts`")
    p.add_argument("--vocab", help="vocabulary TSV with counts (weighting input)")
    p.add_argument("--weighting", choices=["uniform", "threshold", "log"],
                   default="uniform", help="per-pair weight from corpus count")
    p.add_argument("--tau", type=int, default=DEFAULT_TAU,
                   help="count threshold for --weighting threshold")
    p.add_argument("--ridge", type=float, default=1e-8,
                   help="numerical conditioning ridge (fraction of mean eigenvalue)")
    p.add_argument("--window", type=int, default=None,
                   help="window size recorded in the transform metadata")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="fraction of keys held out of the fit for diagnostics")
    p.add_argument("--seed", type=int, default=0, help="seed for the holdout split")
    p.add_argument("--out", required=True, help="output transform file")
    p.add_argument("--report", help="optional fit report TSV")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("induce", help="induce feature embeddings from contexts", **kwargs)
    p.add_argument("--transform", required=True, help="learned transform file")
    p.add_argument("--vectors", required=True, help="pretrained word embeddings")
    p.add_argument("--feature-contexts", required=True,
                   help="annotated contexts TSV (key<TAB>text)")
    p.add_argument("--include-target", action="store_true",
                   help="include the target span in its own context sum")
    p.add_argument("--out", required=True, help="output feature embedding file")
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("docs", help="embed labeled documents from n-gram stores", **kwargs)
    p.add_argument("--stores", nargs="+", required=True,
                   help="induced embedding files, one per order 1..N")
    p.add_argument("--documents", required=True, help="documents TSV (label<TAB>text)")
    p.add_argument("--combine", choices=["concat", "sum"], default="concat",
                   help="concatenate per-order blocks or add them")
    p.add_argument("--normalize", action="store_true", help="unit-normalize documents")
    p.add_argument("--out", required=True, help="output matrix TSV")
    p.add_argument("--labels-out", required=True, help="output labels file")
    p.add_argument("--report", help="optional coverage report TSV")
    p.set_defaults(func=cmd_docs)

    p = sub.add_parser("eval-sim", help="few-shot similarity protocol", **kwargs)
    p.add_argument("--pairs", required=True, help="pairs TSV (word_a, word_b, score)")
    p.add_argument("--contexts-file", required=True,
                   help="rare-word contexts TSV (key<TAB>text)")
    p.add_argument("--vectors", required=True, help="pretrained word embeddings")
    p.add_argument("--transform", help="transform file (for method transform)")
    p.add_argument("--vocab", help="vocabulary TSV (for method sif)")
    p.add_argument("--methods", default="transform,additive",
                   help="comma-separated induction methods")
    p.add_argument("--sizes", default="1,2,4,8,16,32,64,128",
                   help="comma-separated subset sizes")
    p.add_argument("--trials", type=int, default=100, help="shuffling trials")
    p.add_argument("--seed", type=int, default=0, help="protocol seed")
    p.add_argument("--out", required=True, help="output report TSV")
    p.set_defaults(func=cmd_eval_sim)

    p = sub.add_parser("eval-rank", help="retrieval rank of induced vectors", **kwargs)
    p.add_argument("--induced", required=True, help="induced embedding file")
    p.add_argument("--reference", required=True, help="reference embedding file")
    p.add_argument("--out", required=True, help="output report TSV")
    p.set_defaults(func=cmd_eval_rank)

    p = sub.add_parser("classify", help="linear classification over embeddings", **kwargs)
    p.add_argument("--matrix", required=True, help="document matrix TSV")
    p.add_argument("--labels", required=True, help="labels file, one per row")
    p.add_argument("--test-matrix", help="held-out matrix TSV (else tenfold CV)")
    p.add_argument("--test-labels", help="held-out labels file")
    p.add_argument("--folds", type=int, default=10, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=0, help="fold shuffling seed")
    p.add_argument("--out", required=True, help="output report TSV")
    p.set_defaults(func=cmd_classify)
    return parser


def _require_files(*paths) -> None:
    """Validate input paths before any work starts."""
    missing = [str(p) for p in paths if p and not Path(p).is_file()]
    if missing:
        raise CtxvecError(f"input file(s) not found: {', '.join(missing)}")


def cmd_vocab(args) -> None:
    _require_files(args.corpus)
    vocab = corpus_mod.build_vocabulary(corpus_mod.TextCorpus(args.corpus), args.min_count)
    vocab.save(args.out)
    log.info("wrote %d tokens to %s", len(vocab), args.out)


def cmd_contexts(args) -> None:
    _require_files(args.vectors, args.corpus, args.vocab, args.feature_contexts)
    store = embedstore_mod.load_embeddings(args.vectors, kind="word")
    if args.feature_contexts:
        windows = context_mod.read_feature_contexts(
            corpus_mod.TextCorpus(args.feature_contexts)
        )
        acc = context_mod.accumulate(windows, store, args.include_target)
    else:
        if not args.corpus or not args.vocab:
            raise CtxvecError("word and n-gram modes need --corpus and --vocab")
        vocab = corpus_mod.Vocabulary.load(args.vocab)
        text = corpus_mod.TextCorpus(args.corpus)
        if args.ngrams == 1:
            acc = context_mod.accumulate_lines(
                text, store, vocab, args.window, args.include_target, threads=args.threads
            )
        else:
            windows = corpus_mod.scan_ngram_contexts(
                text, vocab, args.ngrams, args.window, args.min_ngram_count
            )
            acc = context_mod.accumulate(windows, store, args.include_target)
    result = context_mod.finalize(acc)
    embedstore_mod.save_embeddings(result, args.out)
    log.info("wrote %d context embeddings to %s", len(result), args.out)


def _weight_from_args(args) -> transform_mod.WeightFunction:
    if args.weighting == "uniform":
        return transform_mod.WeightFunction.uniform()
    if args.weighting == "threshold":
        return transform_mod.WeightFunction.hard_threshold(args.tau)
    return transform_mod.WeightFunction.log_count()


def cmd_learn(args) -> None:
    _require_files(args.vectors, args.contexts, args.vocab)
    word_vectors = embedstore_mod.load_embeddings(args.vectors, kind="word")
    context_vectors = embedstore_mod.load_embeddings(args.contexts, kind="feature")
    counts = corpus_mod.Vocabulary.load(args.vocab) if args.vocab else None
    weight = _weight_from_args(args)
    if args.holdout > 0:
        shared = [k for k in context_vectors.keys() if k in word_vectors]
        train_keys, _ = transform_mod.split_keys(shared, args.holdout, args.seed)
        train_ctx = embedstore_mod.EmbeddingStore(context_vectors.dim, kind="feature")
        for key in train_keys:
            train_ctx.add(key, context_vectors.vector(key))
        fitted, diag = transform_mod.learn_transform(
            word_vectors, train_ctx, counts, weight, args.ridge, args.window
        )
    else:
        fitted, diag = transform_mod.learn_transform(
            word_vectors, context_vectors, counts, weight, args.ridge, args.window
        )
    transform_mod.save_transform(fitted, args.out)
    log.info("weighted mean fit cosine %.4f over %d pairs", diag.weighted_mean_cosine,
             diag.pairs_used)
    if args.report:
        report = transform_mod.fit_report(
            fitted, word_vectors, context_vectors, args.holdout, args.seed
        )
        report.save(args.report)


def cmd_induce(args) -> None:
    _require_files(args.transform, args.vectors, args.feature_contexts)
    fitted = transform_mod.load_transform(args.transform)
    store = embedstore_mod.load_embeddings(args.vectors, kind="word")
    windows = context_mod.read_feature_contexts(
        corpus_mod.TextCorpus(args.feature_contexts)
    )
    acc = context_mod.accumulate(windows, store, args.include_target)
    induced = transform_mod.apply_transform(fitted, context_mod.finalize(acc))
    embedstore_mod.save_embeddings(induced, args.out)
    log.info("induced %d feature embeddings to %s", len(induced), args.out)


def cmd_docs(args) -> None:
    _require_files(args.documents, *args.stores)
    stores = [embedstore_mod.load_embeddings(p, kind="feature") for p in args.stores]
    docs = docembed_mod.read_documents(corpus_mod.TextCorpus(args.documents))
    matrix, labels, coverage = docembed_mod.embed_corpus(
        docs, stores, normalize=args.normalize, combine=args.combine
    )
    docembed_mod.save_matrix_tsv(matrix, args.out)
    docembed_mod.save_labels(labels, args.labels_out)
    if args.report:
        coverage.save(args.report)
    log.info("embedded %d documents to %s", len(labels), args.out)


def cmd_eval_sim(args) -> None:
    _require_files(args.pairs, args.contexts_file, args.vectors, args.transform, args.vocab)
    word_vectors = embedstore_mod.load_embeddings(args.vectors, kind="word")
    fitted = transform_mod.load_transform(args.transform) if args.transform else None
    counts = corpus_mod.Vocabulary.load(args.vocab) if args.vocab else None
    pairs = eval_mod.read_pairs(corpus_mod.TextCorpus(args.pairs))
    contexts: dict[str, list[str]] = {}
    with open(args.contexts_file, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise CtxvecError(f"{args.contexts_file}: line {lineno}: expected key<TAB>text")
            key, text = line.split("\t", 1)
            contexts.setdefault(key, []).append(text)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    benchmark = eval_mod.FewShotBenchmark(pairs, contexts, sizes, args.trials)
    combined = eval_mod.EvalReport()
    for method in args.methods.split(","):
        report = eval_mod.run_fewshot_protocol(
            benchmark, method.strip(), word_vectors, fitted, counts, seed=args.seed
        )
        combined.extend(report)
    combined.save(args.out)
    log.info("wrote similarity report to %s", args.out)


def cmd_eval_rank(args) -> None:
    _require_files(args.induced, args.reference)
    induced = embedstore_mod.load_embeddings(args.induced, kind="feature")
    reference = embedstore_mod.load_embeddings(args.reference, kind="word")
    report = eval_mod.rank_retrieval(induced, reference)
    report.save(args.out)
    log.info("wrote rank report to %s", args.out)


def cmd_classify(args) -> None:
    _require_files(args.matrix, args.labels, args.test_matrix, args.test_labels)
    matrix = docembed_mod.load_matrix_tsv(args.matrix)
    labels = docembed_mod.load_labels(args.labels)
    if len(labels) != len(matrix):
        raise CtxvecError(f"{len(matrix)} matrix rows but {len(labels)} labels")
    if bool(args.test_matrix) != bool(args.test_labels):
        raise CtxvecError("--test-matrix and --test-labels go together")
    if args.test_matrix:
        test_matrix = docembed_mod.load_matrix_tsv(args.test_matrix)
        test_labels = docembed_mod.load_labels(args.test_labels)
        if len(test_labels) != len(test_matrix):
            raise CtxvecError("test matrix and labels disagree")
        _, report = classify_mod.evaluate_on_test(
            matrix, labels, test_matrix, test_labels, folds=args.folds, seed=args.seed
        )
    else:
        _, report = classify_mod.train_linear_classifier(
            matrix, labels, folds=args.folds, seed=args.seed
        )
    report.save(args.out)
    log.info("wrote classification report to %s", args.out)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CtxvecError as exc:
        print(f"ctxvec: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception:
        traceback.print_exc()
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
