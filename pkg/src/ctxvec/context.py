"""Additive context embeddings and baseline composition schemes.

The accumulator stores un-normalized sums plus window counts so that shard
merging is exact; division by the window count happens once, in finalize.
All accumulation runs in double precision regardless of how the source
vectors were stored.
"""

from __future__ import annotations

import logging
import re
from typing import Iterable, Iterator, Sequence

import numpy as np

from .corpus import ContextWindow, Vocabulary, iter_line_shards, tokenize
from .embedstore import EmbeddingStore
from .errors import CtxvecError, DimensionMismatchError, FormatError

log = logging.getLogger(__name__)


class ContextAccumulator:
    """Per-key running sum of context-word vectors plus the window count."""

    def __init__(self, dim: int):
        if dim < 1:
            raise CtxvecError("accumulator dimension must be >= 1")
        self.dim = int(dim)
        self._sums: dict[str, np.ndarray] = {}
        self._counts: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._sums)

    def __contains__(self, key: str) -> bool:
        return key in self._sums

    def add(self, key: str, vector_sum: np.ndarray, count: int) -> None:
        """Fold one pre-summed contribution into the entry for key."""
        entry = self._sums.get(key)
        if entry is None:
            self._sums[key] = np.asarray(vector_sum, dtype=np.float64).copy()
            self._counts[key] = count
        else:
            entry += vector_sum
            self._counts[key] += count

    def add_window(
        self, key: str, window: ContextWindow, store: EmbeddingStore, include_target: bool = False
    ) -> None:
        """Add one window: sum of vectors of context tokens present in store.

        The window always counts, even if every context token lacked a vector.
        """
        total = np.zeros(self.dim)
        tokens = window.context_tokens()
        if include_target:
            tokens = tokens + window.feature_span
        for tok in tokens:
            vec = store.get(tok)
            if vec is not None:
                total += vec
        self.add(key, total, 1)

    def merge(self, other: "ContextAccumulator") -> None:
        """Pointwise sum of both fields of the other accumulator into this one."""
        if other.dim != self.dim:
            raise DimensionMismatchError(
                f"cannot merge accumulators of dims {self.dim} and {other.dim}"
            )
        for key, vec in other._sums.items():
            self.add(key, vec, other._counts[key])

    def entries(self) -> Iterator[tuple[str, np.ndarray, int]]:
        for key, vec in self._sums.items():
            yield key, vec, self._counts[key]

    def zero_count_keys(self) -> list[str]:
        return [k for k, c in self._counts.items() if c == 0]


def accumulate(
    windows: Iterable[tuple[str, ContextWindow]],
    word_vectors: EmbeddingStore,
    include_target: bool = False,
) -> ContextAccumulator:
    """Reference accumulation over a (key, window) stream.

    Context tokens without a vector in word_vectors are skipped; every window
    still increments the key's count.
    """
    if word_vectors.kind != "word":
        raise CtxvecError("accumulate expects a store of kind 'word'")
    acc = ContextAccumulator(word_vectors.dim)
    for key, window in windows:
        acc.add_window(key, window, word_vectors, include_target)
    return acc


def _accumulate_lines_dense(
    lines: Sequence[str],
    word_vectors: EmbeddingStore,
    vocab: Vocabulary,
    window_size: int,
    include_target: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Fused scan+accumulate over one shard, dense over vocab ids.

    Window sums come from per-line prefix sums, so the cost per line is
    O(len * dim) instead of O(len * window * dim).
    """
    dim = word_vectors.dim
    sums = np.zeros((len(vocab), dim))
    counts = np.zeros(len(vocab), dtype=np.int64)
    store_index = word_vectors._index  # hot loop; read-only access
    matrix = word_vectors.matrix
    vocab_ids = {t: i for i, t in enumerate(vocab)}
    for line in lines:
        tokens = tokenize(line)
        n = len(tokens)
        if n == 0:
            continue
        rows = np.full(n, -1, dtype=np.int64)
        targets = np.full(n, -1, dtype=np.int64)
        for i, tok in enumerate(tokens):
            idx = store_index.get(tok)
            if idx is not None:
                rows[i] = idx
            tid = vocab_ids.get(tok)
            if tid is not None:
                targets[i] = tid
        tmask = targets >= 0
        if not tmask.any():
            continue
        line_vecs = np.where((rows >= 0)[:, None], matrix[rows], 0.0)
        prefix = np.zeros((n + 1, dim))
        np.cumsum(line_vecs, axis=0, out=prefix[1:])
        pos = np.arange(n)
        starts = np.maximum(pos - window_size, 0)
        ends = np.minimum(pos + 1 + window_size, n)
        win = (prefix[pos] - prefix[starts]) + (prefix[ends] - prefix[pos + 1])
        if include_target:
            win = win + line_vecs
        np.add.at(sums, targets[tmask], win[tmask])
        np.add.at(counts, targets[tmask], 1)
    return sums, counts


def accumulate_lines(
    corpus: Iterable[str],
    word_vectors: EmbeddingStore,
    vocab: Vocabulary,
    window_size: int,
    include_target: bool = False,
    threads: int = 1,
    shard_lines: int = 65536,
) -> ContextAccumulator:
    """Fused word-context accumulation over raw corpus lines.

    Equivalent to accumulate(scan_word_contexts(...)) up to float summation
    order. Shard decomposition is fixed by shard_lines and partial results are
    merged in shard order, so the output is byte-identical for any thread
    count.
    """
    if word_vectors.kind != "word":
        raise CtxvecError("accumulate_lines expects a store of kind 'word'")
    if threads < 1:
        raise CtxvecError("threads must be >= 1")
    dim = word_vectors.dim
    total_sums = np.zeros((len(vocab), dim))
    total_counts = np.zeros(len(vocab), dtype=np.int64)

    def work(shard: list[str]) -> tuple[np.ndarray, np.ndarray]:
        return _accumulate_lines_dense(shard, word_vectors, vocab, window_size, include_target)

    shards = iter_line_shards(corpus, shard_lines)
    if threads == 1:
        results = map(work, shards)
    else:
        from concurrent.futures import ThreadPoolExecutor

        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(work, shards)
    for sums, counts in results:
        total_sums += sums
        total_counts += counts
    if threads > 1:
        pool.shutdown()

    acc = ContextAccumulator(dim)
    for tid, token in enumerate(vocab):
        if total_counts[tid] > 0:
            acc.add(token, total_sums[tid], int(total_counts[tid]))
    return acc


def finalize(acc: ContextAccumulator) -> EmbeddingStore:
    """Divide each entry's sum by its window count.

    Per-window 1/|c| normalization is deliberately NOT applied here; with a
    fixed window size it is a constant absorbed by the learned transform.
    Keys with zero windows are omitted and reported.
    """
    store = EmbeddingStore(acc.dim, kind="feature")
    dropped = []
    for key, vec, count in acc.entries():
        if count == 0:
            dropped.append(key)
            continue
        store.add(key, vec / count)
    if dropped:
        log.warning(
            "finalize dropped %d key(s) with no contexts: %s%s",
            len(dropped),
            ", ".join(dropped[:5]),
            "..." if len(dropped) > 5 else "",
        )
    return store


def baseline_additive(
    windows: Iterable[tuple[str, ContextWindow]],
    word_vectors: EmbeddingStore,
    per_window_norm: bool = True,
    drop_stopwords: bool = False,
    stopword_list: frozenset[str] | None = None,
) -> EmbeddingStore:
    """Plain additive composition: average over windows of per-window sums.

    With per_window_norm each window contributes the mean of its usable token
    vectors instead of the sum. Usable means present in word_vectors and, when
    drop_stopwords is set, not a stop word. Windows with zero usable tokens
    contribute nothing and do not count toward the denominator.
    """
    if drop_stopwords and stopword_list is None:
        from .stopwords import STOPWORDS

        stopword_list = STOPWORDS
    acc = ContextAccumulator(word_vectors.dim)
    for key, window in windows:
        usable = []
        for tok in window.context_tokens():
            if drop_stopwords and tok in stopword_list:
                continue
            vec = word_vectors.get(tok)
            if vec is not None:
                usable.append(vec)
        if not usable:
            if key not in acc:
                acc.add(key, np.zeros(word_vectors.dim), 0)
            continue
        total = np.sum(usable, axis=0)
        if per_window_norm:
            total = total / len(usable)
        acc.add(key, total, 1)
    return finalize(acc)


def baseline_sif_weighted(
    windows: Iterable[tuple[str, ContextWindow]],
    word_vectors: EmbeddingStore,
    counts: Vocabulary,
    a: float = 1e-3,
) -> EmbeddingStore:
    """Frequency-discounted composition: token weight a / (a + p(token)).

    p(token) is the token's corpus frequency from counts; tokens absent from
    counts get weight 1. Weighted per-window sums are averaged over windows.
    """
    if a <= 0:
        raise CtxvecError("SIF parameter a must be > 0")
    total = counts.total_count
    acc = ContextAccumulator(word_vectors.dim)
    for key, window in windows:
        vec = np.zeros(word_vectors.dim)
        usable = 0
        for tok in window.context_tokens():
            row = word_vectors.get(tok)
            if row is None:
                continue
            c = counts.count(tok)
            weight = a / (a + c / total) if c > 0 else 1.0
            vec += weight * row
            usable += 1
        if usable == 0:
            if key not in acc:
                acc.add(key, np.zeros(word_vectors.dim), 0)
            continue
        acc.add(key, vec, 1)
    return finalize(acc)


def principal_directions(store: EmbeddingStore, k: int) -> np.ndarray:
    """Top-k directions of the uncentered second moment of the store's vectors.

    Computed by power iteration with deflation (tolerance 1e-9, at most 1000
    iterations per component); the mean is not subtracted. Raises when the
    iteration stalls, which indicates a degenerate spectrum.
    """
    if not 1 <= k < store.dim:
        raise CtxvecError(f"k must be in [1, dim); got k={k}, dim={store.dim}")
    data = store.matrix.copy()
    directions = np.zeros((k, store.dim))
    for comp in range(k):
        rng = np.random.default_rng(0x5EED + comp)
        vec = rng.standard_normal(store.dim)
        vec /= np.linalg.norm(vec)
        converged = False
        for _ in range(1000):
            nxt = data.T @ (data @ vec)
            norm = np.linalg.norm(nxt)
            if norm <= 1e-30:
                raise CtxvecError(
                    f"power iteration found zero spectrum at component {comp + 1}"
                )
            nxt /= norm
            delta = min(np.linalg.norm(nxt - vec), np.linalg.norm(nxt + vec))
            vec = nxt
            if delta < 1e-9:
                converged = True
                break
        if not converged:
            raise CtxvecError(
                f"power iteration did not converge for component {comp + 1} "
                "(degenerate spectrum)"
            )
        directions[comp] = vec
        data -= np.outer(data @ vec, vec)
    return directions


def remove_top_components(store: EmbeddingStore, k: int) -> EmbeddingStore:
    """Project out the store's top-k principal directions from every vector."""
    directions = principal_directions(store, k)
    cleaned = store.matrix - (store.matrix @ directions.T) @ directions
    out = EmbeddingStore(store.dim, kind=store.kind)
    for i, key in enumerate(store.keys()):
        out.add(key, cleaned[i])
    return out


_FEAT_SPLIT_RE = re.compile(r"(<feat>.*?</feat>)", re.DOTALL)


def parse_feature_text(text: str, window_size: int | None = None) -> ContextWindow:
    """Turn one annotated context line into a window.

    Tokens inside <feat>...</feat> form the feature span and are excluded
    from the context. Without tags the whole line is context (left side) and
    the span is empty. The window spans the entire line.
    """
    span: list[str] = []
    left: list[str] = []
    right: list[str] = []
    seen_span = False
    for piece in _FEAT_SPLIT_RE.split(text):
        if piece.startswith("<feat>") and piece.endswith("</feat>"):
            span.extend(tokenize(piece[len("<feat>") : -len("</feat>")]))
            seen_span = True
        else:
            (right if seen_span else left).extend(tokenize(piece))
    if window_size is None:
        window_size = max(1, len(left), len(right))
    return ContextWindow(tuple(span), tuple(left), tuple(right), window_size)


def read_feature_contexts(lines: Iterable[str]) -> Iterator[tuple[str, ContextWindow]]:
    """Parse the annotated-feature context file: `feature_key<TAB>context text`."""
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise FormatError(f"feature contexts: line {lineno}: expected key<TAB>text")
        key, text = line.split("\t", 1)
        if not key:
            raise FormatError(f"feature contexts: line {lineno}: empty feature key")
        yield key, parse_feature_text(text)
