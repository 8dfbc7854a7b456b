"""Synthetic corpora from the log-linear generative model.

Contexts are produced by sampling a context vector from a Gaussian prior and
drawing words with probability proportional to exp(<context, word>). Under
this model the best linear map recovers word vectors from their additive
context embeddings, so these generators serve as end-to-end oracles: the
pipeline must reconstruct the planted ground-truth vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedstore import EmbeddingStore
from .errors import CtxvecError
from .evaluation import DEFAULT_SUBSET_SIZES, FewShotBenchmark, SimilarityPair, cosine

_CHUNK = 4096


def _token_names(prefix: str, count: int) -> list[str]:
    width = max(4, len(str(count - 1)))
    return [f"{prefix}{i:0{width}d}" for i in range(count)]


def _softmax_draw(
    vectors: np.ndarray, ctx_vecs: np.ndarray, uniforms: np.ndarray
) -> np.ndarray:
    """Map uniform draws through each row's softmax CDF over the vocabulary.

    Chunked over rows; per-row arithmetic is independent of the chunking, so
    results depend only on the inputs.
    """
    n, draws = uniforms.shape
    out = np.empty((n, draws), dtype=np.int64)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        logits = ctx_vecs[lo:hi] @ vectors.T
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        cdf = np.cumsum(probs, axis=1)
        for r in range(hi - lo):
            row_cdf = cdf[r]
            idx = np.searchsorted(row_cdf, uniforms[lo + r] * row_cdf[-1], side="right")
            out[lo + r] = np.minimum(idx, vectors.shape[0] - 1)
    return out


def generate_synthetic_corpus(
    dim: int,
    vocab_size: int,
    num_contexts: int,
    context_len: int,
    seed: int = 0,
) -> tuple[list[str], EmbeddingStore]:
    """One corpus line per context, plus the planted word vectors.

    Ground-truth vectors have i.i.d. N(0, 1/dim) entries (unit expected norm);
    context vectors are standard normal; the words of each context are drawn
    i.i.d. from the softmax over inner products. Deterministic given the seed.
    """
    if vocab_size < dim:
        raise CtxvecError("vocab_size must be >= dim")
    if context_len < 2:
        raise CtxvecError("context_len must be >= 2")
    rng = np.random.default_rng(seed)
    truth = rng.normal(0.0, 1.0 / np.sqrt(dim), (vocab_size, dim))
    ctx_vecs = rng.standard_normal((num_contexts, dim))
    uniforms = rng.random((num_contexts, context_len))
    ids = _softmax_draw(truth, ctx_vecs, uniforms)

    tokens = _token_names("w", vocab_size)
    lines = [" ".join(tokens[j] for j in row) for row in ids]
    store = EmbeddingStore(dim, kind="word")
    for i, tok in enumerate(tokens):
        store.add(tok, truth[i])
    return lines, store


@dataclass
class FewshotData:
    """Synthetic stand-in for a rare-word similarity benchmark."""

    corpus_lines: list[str]
    word_vectors: EmbeddingStore
    rare_vectors: EmbeddingStore
    benchmark: FewShotBenchmark


def generate_fewshot_benchmark(
    dim: int = 20,
    vocab_size: int = 500,
    num_rare: int = 50,
    num_contexts: int = 100_000,
    context_len: int = 16,
    contexts_per_rare: int = 255,
    subset_sizes: tuple[int, ...] = DEFAULT_SUBSET_SIZES,
    trials: int = 20,
    common_scale: float = 0.5,
    common_jitter: float = 0.25,
    num_function_words: int = 10,
    function_subspace: int = 4,
    function_norm: float = 2.0,
    function_rate: float = 0.4,
    rare_strength: float = 1.75,
    seed: int = 0,
) -> FewshotData:
    """Training corpus, pretrained-vector stand-ins, and a rare-word benchmark.

    The vocabulary mixes content words with a small set of high-frequency
    function words. Content vectors are isotropic plus a mild per-word loading
    (common_scale + N(0, common_jitter^2)) on one shared direction; function
    words get large vectors confined to a low-dimensional shared subspace and
    fill each context slot with probability function_rate regardless of topic.
    Summed contexts are therefore dominated by function-word noise that plain
    addition cannot shed but a learned map squashes, mirroring how frequent
    words pollute additive composition with real embeddings.

    Rare words never appear in the training corpus. Their context lines are
    drawn from the model's posterior given the word (context vector normal
    around the word's isotropic part), with the rare token tagged as
    <feat>...</feat> at a random position. Human scores are the true cosines;
    anchor words come from content words with typical loadings, half of them
    nearest neighbors of their rare word so scores spread well.
    """
    if contexts_per_rare < sum(subset_sizes):
        raise CtxvecError("contexts_per_rare must cover sum(subset_sizes)")
    if function_subspace >= dim:
        raise CtxvecError("function_subspace must be < dim")
    rng = np.random.default_rng(seed)
    common = rng.standard_normal(dim)
    common /= np.linalg.norm(common)
    eps_train = rng.normal(0.0, 1.0 / np.sqrt(dim), (vocab_size, dim))
    eps_rare = rng.normal(0.0, rare_strength / np.sqrt(dim), (num_rare, dim))
    loadings = common_scale + common_jitter * rng.standard_normal(vocab_size)
    v_train = loadings[:, None] * common + eps_train
    v_rare = common_scale * common + eps_rare

    # Function words share a mean direction plus per-word spread, both inside
    # a low-dimensional subspace, so summed contexts carry a reliable bias and
    # reliable composition noise there.
    basis = np.linalg.qr(rng.standard_normal((dim, function_subspace)))[0].T
    mean_dir = rng.standard_normal(function_subspace)
    mean_dir /= np.linalg.norm(mean_dir)
    coeffs = function_norm * (
        mean_dir + 0.75 * rng.standard_normal((num_function_words, function_subspace))
    )
    v_function = coeffs @ basis

    train_tokens = _token_names("w", vocab_size)
    function_tokens = _token_names("f", num_function_words)

    def mixture_lines(ctx_vecs: np.ndarray, length: int) -> list[list[str]]:
        n = ctx_vecs.shape[0]
        is_function = rng.random((n, length)) < function_rate
        function_ids = rng.integers(0, num_function_words, (n, length))
        uniforms = rng.random((n, length))
        content_ids = _softmax_draw(v_train, ctx_vecs, uniforms)
        lines = []
        for r in range(n):
            words = [
                function_tokens[function_ids[r, j]]
                if is_function[r, j]
                else train_tokens[content_ids[r, j]]
                for j in range(length)
            ]
            lines.append(words)
        return lines

    corpus_lines = [
        " ".join(words)
        for words in mixture_lines(rng.standard_normal((num_contexts, dim)), context_len)
    ]

    rare_tokens = _token_names("rare", num_rare)
    contexts: dict[str, list[str]] = {}
    for r in range(num_rare):
        around = eps_rare[r] + rng.standard_normal((contexts_per_rare, dim))
        positions = rng.integers(0, context_len, size=contexts_per_rare)
        lines = []
        for words, pos in zip(mixture_lines(around, context_len - 1), positions):
            words.insert(int(pos), f"<feat>{rare_tokens[r]}</feat>")
            lines.append(" ".join(words))
        contexts[rare_tokens[r]] = lines

    # Anchor words are restricted to typical common loadings so pair scores
    # spread by content similarity, not by an a-side loading a method could
    # exploit without ever looking at the rare word's contexts.
    typical = np.argsort(np.abs(loadings - common_scale))[: max(num_rare, vocab_size // 5)]
    sims = (v_train / np.linalg.norm(v_train, axis=1, keepdims=True)) @ (
        v_rare / np.linalg.norm(v_rare, axis=1, keepdims=True)
    ).T
    pairs = []
    for r in range(num_rare):
        if r % 2 == 0:
            a_idx = int(typical[np.argmax(sims[typical, r])])
        else:
            a_idx = int(rng.choice(typical))
        score = cosine(v_train[a_idx], v_rare[r])
        pairs.append(SimilarityPair(train_tokens[a_idx], rare_tokens[r], score))

    word_store = EmbeddingStore(dim, kind="word")
    for i, tok in enumerate(train_tokens):
        word_store.add(tok, v_train[i])
    for i, tok in enumerate(function_tokens):
        word_store.add(tok, v_function[i])
    rare_store = EmbeddingStore(dim, kind="word")
    for i, tok in enumerate(rare_tokens):
        rare_store.add(tok, v_rare[i])
    benchmark = FewShotBenchmark(pairs, contexts, tuple(subset_sizes), trials)
    return FewshotData(corpus_lines, word_store, rare_store, benchmark)


@dataclass
class SenseData:
    """Two-topic disambiguation fixture: base corpus plus sense contexts."""

    corpus_lines: list[str]
    word_vectors: EmbeddingStore
    sense_train: dict[str, list[str]]
    sense_test: list[tuple[str, str]]


def generate_sense_corpus(
    dim: int = 20,
    vocab_size: int = 400,
    num_contexts: int = 60_000,
    context_len: int = 10,
    train_per_sense: int = 40,
    test_per_sense: int = 150,
    sense_context_len: int = 12,
    sense_norm: float = 3.0,
    seed: int = 0,
) -> SenseData:
    """A base corpus plus contexts of a two-sense pseudo-word.

    The two sense directions are orthonormalized draws from the word prior,
    scaled to sense_norm, so their context distributions are well separated.
    Sense context lines embed an out-of-vocabulary surface token where the
    ambiguous word would sit.
    """
    rng = np.random.default_rng(seed)
    truth = rng.normal(0.0, 1.0 / np.sqrt(dim), (vocab_size, dim))
    ctx_vecs = rng.standard_normal((num_contexts, dim))
    uniforms = rng.random((num_contexts, context_len))
    ids = _softmax_draw(truth, ctx_vecs, uniforms)
    tokens = _token_names("w", vocab_size)
    corpus_lines = [" ".join(tokens[j] for j in row) for row in ids]

    raw = rng.standard_normal((2, dim))
    raw[1] -= (raw[1] @ raw[0]) / (raw[0] @ raw[0]) * raw[0]
    dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True) * sense_norm

    def sense_lines(direction: np.ndarray, count: int, length: int) -> list[str]:
        around = direction + rng.standard_normal((count, dim))
        draws = rng.random((count, length - 1))
        sense_ids = _softmax_draw(truth, around, draws)
        positions = rng.integers(0, length, size=count)
        lines = []
        for row, pos in zip(sense_ids, positions):
            words = [tokens[j] for j in row]
            words.insert(int(pos), "senseword")
            lines.append(" ".join(words))
        return lines

    sense_train = {
        "sense0": sense_lines(dirs[0], train_per_sense, sense_context_len),
        "sense1": sense_lines(dirs[1], train_per_sense, sense_context_len),
    }
    sense_test = []
    for name, direction in (("sense0", dirs[0]), ("sense1", dirs[1])):
        for line in sense_lines(direction, test_per_sense, sense_context_len):
            sense_test.append((name, line))

    store = EmbeddingStore(dim, kind="word")
    for i, tok in enumerate(tokens):
        store.add(tok, truth[i])
    return SenseData(corpus_lines, store, sense_train, sense_test)
