"""Evaluation metrics and protocols.

Spearman rank correlation for similarity benchmarks, nearest-neighbor rank
retrieval, the disjoint-subset few-shot protocol, and similarity-based
disambiguation of annotated features. Ranking conventions the underlying
literature leaves open are pinned here: Spearman uses average ranks for ties,
retrieval breaks cosine ties lexicographically by key.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .context import ContextWindow, parse_feature_text, remove_top_components
from .corpus import Vocabulary
from .embedstore import EmbeddingStore
from .errors import CtxvecError, FormatError
from .report import EvalReport
from .transform import Transform

log = logging.getLogger(__name__)

DEFAULT_SUBSET_SIZES = (1, 2, 4, 8, 16, 32, 64, 128)

Inducer = Callable[[str, Sequence[ContextWindow]], "np.ndarray | None"]


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties assigned the average of their positions."""
    vals = np.asarray(values, dtype=np.float64)
    order = np.argsort(vals, kind="stable")
    ranks = np.empty(len(vals))
    i = 0
    n = len(vals)
    while i < n:
        j = i
        while j < n and vals[order[j]] == vals[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    if len(xs) != len(ys):
        raise CtxvecError("spearman inputs must have equal length")
    if len(xs) < 2:
        raise CtxvecError("undefined correlation: need at least 2 points")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = np.sqrt((rx @ rx) * (ry @ ry))
    if denom == 0:
        raise CtxvecError("undefined correlation: zero rank variance")
    return float(np.clip(rx @ ry / denom, -1.0, 1.0))


@dataclass(frozen=True)
class SimilarityPair:
    """A human-scored pair; word_a has a pretrained vector, word_b is induced."""

    word_a: str
    word_b: str
    human_score: float

    def __post_init__(self):
        if self.word_a == self.word_b:
            raise CtxvecError(f"similarity pair with identical words {self.word_a!r}")


@dataclass
class FewShotBenchmark:
    """Pairs plus per-rare-word context lines for the disjoint-subset protocol."""

    pairs: list[SimilarityPair]
    contexts: dict[str, list[str]]
    subset_sizes: tuple[int, ...] = DEFAULT_SUBSET_SIZES
    trials: int = 100


def read_pairs(lines: Iterable[str]) -> list[SimilarityPair]:
    """Parse the pairs file: `word_a<TAB>word_b<TAB>score`."""
    pairs = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise FormatError(f"pairs: line {lineno}: expected word_a<TAB>word_b<TAB>score")
        try:
            score = float(parts[2])
        except ValueError:
            raise FormatError(f"pairs: line {lineno}: bad score {parts[2]!r}") from None
        pairs.append(SimilarityPair(parts[0], parts[1], score))
    return pairs


def _sum_windows(
    windows: Sequence[ContextWindow], word_vectors: EmbeddingStore
) -> np.ndarray | None:
    """Mean over windows of the sum of in-store context vectors; all windows count."""
    if not windows:
        return None
    total = np.zeros(word_vectors.dim)
    for window in windows:
        for tok in window.context_tokens():
            vec = word_vectors.get(tok)
            if vec is not None:
                total += vec
    return total / len(windows)


def _additive_windows(
    windows: Sequence[ContextWindow],
    word_vectors: EmbeddingStore,
    stopword_list: frozenset[str] | None,
    weights: Callable[[str], float] | None = None,
) -> np.ndarray | None:
    """Per-window means (or weighted sums) averaged over usable windows."""
    total = np.zeros(word_vectors.dim)
    effective = 0
    for window in windows:
        vec = np.zeros(word_vectors.dim)
        usable = 0
        for tok in window.context_tokens():
            if stopword_list is not None and tok in stopword_list:
                continue
            row = word_vectors.get(tok)
            if row is None:
                continue
            if weights is None:
                vec += row
            else:
                vec += weights(tok) * row
            usable += 1
        if usable == 0:
            continue
        if weights is None:
            vec /= usable
        total += vec
        effective += 1
    if effective == 0:
        return None
    return total / effective


def _sif_weights(counts: Vocabulary, a: float) -> Callable[[str], float]:
    total = counts.total_count

    def weight(tok: str) -> float:
        c = counts.count(tok)
        return a / (a + c / total) if c > 0 else 1.0

    return weight


def make_inducer(
    method: str,
    word_vectors: EmbeddingStore,
    transform: Transform | None = None,
    counts: Vocabulary | None = None,
    stopword_list: frozenset[str] | None = None,
    pc_components: int = 1,
    sif_a: float = 1e-3,
    pc_order: str = "weight_first",
) -> Inducer:
    """Build a (key, windows) -> vector inducer for a named method.

    Methods: transform (learned linear map on summed contexts), additive,
    additive_nostop, sif, pc_removed, sif_pc. The pc variants project the top
    principal directions out of the word store once, up front.
    """
    if method == "transform":
        if transform is None:
            raise CtxvecError("method 'transform' requires a learned transform")
        matrix = transform.matrix

        def induce(key, windows):
            ctx = _sum_windows(windows, word_vectors)
            return None if ctx is None else matrix @ ctx

        return induce
    if method == "additive":
        return lambda key, windows: _additive_windows(windows, word_vectors, None)
    if method == "additive_nostop":
        if stopword_list is None:
            from .stopwords import STOPWORDS

            stopword_list = STOPWORDS
        stops = stopword_list
        return lambda key, windows: _additive_windows(windows, word_vectors, stops)
    if method == "sif":
        if counts is None:
            raise CtxvecError("method 'sif' requires corpus counts")
        weights = _sif_weights(counts, sif_a)
        return lambda key, windows: _additive_windows(windows, word_vectors, None, weights)
    if method == "pc_removed":
        cleaned = remove_top_components(word_vectors, pc_components)
        return lambda key, windows: _additive_windows(windows, cleaned, None)
    if method == "sif_pc":
        if counts is None:
            raise CtxvecError("method 'sif_pc' requires corpus counts")
        weights = _sif_weights(counts, sif_a)
        if pc_order == "remove_first":
            cleaned = remove_top_components(word_vectors, pc_components)
            return lambda key, windows: _additive_windows(windows, cleaned, None, weights)
        if pc_order != "weight_first":
            raise CtxvecError(f"unknown pc_order {pc_order!r}")
        from .context import principal_directions

        directions = principal_directions(word_vectors, pc_components)

        def induce(key, windows):
            vec = _additive_windows(windows, word_vectors, None, weights)
            if vec is None:
                return None
            return vec - directions.T @ (directions @ vec)

        return induce
    raise CtxvecError(f"unknown induction method {method!r}")


def run_fewshot_protocol(
    benchmark: FewShotBenchmark,
    inducer: str | Inducer,
    word_vectors: EmbeddingStore,
    transform: Transform | None = None,
    counts: Vocabulary | None = None,
    seed: int = 0,
    stopword_list: frozenset[str] | None = None,
) -> EvalReport:
    """Disjoint-subset few-shot evaluation.

    Every trial reshuffles each rare word's contexts with a generator seeded
    by (seed, trial) and carves consecutive disjoint subsets of the configured
    sizes, so trial t is identical no matter how many trials run. Per subset
    size, the Spearman correlation between induced-vs-pretrained cosine and
    the human score is averaged over trials. Rare words with fewer than
    sum(subset_sizes) contexts are excluded and reported.
    """
    if isinstance(inducer, str):
        name = inducer
        induce = make_inducer(
            name, word_vectors, transform, counts, stopword_list=stopword_list
        )
    else:
        name = "custom"
        induce = inducer
    sizes = tuple(benchmark.subset_sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise CtxvecError("subset sizes must be positive")
    needed = sum(sizes)

    excluded = set()
    pairs = []
    for pair in benchmark.pairs:
        if pair.word_a not in word_vectors:
            excluded.add(pair.word_a)
            continue
        if len(benchmark.contexts.get(pair.word_b, [])) < needed:
            excluded.add(pair.word_b)
            continue
        pairs.append(pair)
    if excluded:
        log.warning("few-shot protocol excluded %d word(s): %s",
                    len(excluded), ", ".join(sorted(excluded)[:5]))
    if len(pairs) < 2:
        raise CtxvecError("fewer than 2 usable pairs after exclusions")

    words = sorted({p.word_b for p in pairs})
    windows = {w: [parse_feature_text(line) for line in benchmark.contexts[w]] for w in words}
    a_vecs = {p.word_a: word_vectors.vector(p.word_a) for p in pairs}

    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rho_sums = np.zeros(len(sizes))
    for trial in range(benchmark.trials):
        rng = np.random.default_rng([seed, trial])
        perms = {w: rng.permutation(len(windows[w])) for w in words}
        for si, size in enumerate(sizes):
            induced = {}
            for w in words:
                chosen = [windows[w][j] for j in perms[w][offsets[si] : offsets[si + 1]]]
                induced[w] = induce(w, chosen)
            human = []
            scores = []
            for pair in pairs:
                vec = induced[pair.word_b]
                if vec is None:
                    continue
                human.append(pair.human_score)
                scores.append(cosine(a_vecs[pair.word_a], vec))
            rho_sums[si] += spearman(human, scores)

    report = EvalReport()
    for si, size in enumerate(sizes):
        report.add("spearman", f"{name} n={size}", rho_sums[si] / benchmark.trials)
    report.add("excluded_words", name, len(excluded))
    report.add("trials", name, benchmark.trials)
    return report


def rank_retrieval(induced: EmbeddingStore, reference: EmbeddingStore) -> EvalReport:
    """Rank of each induced key's reference vector among its nearest neighbors.

    The reference store is the search vocabulary; ordering is by cosine
    similarity, ties broken lexicographically by key. Reports the mean
    reciprocal rank and the median rank (midpoint-averaged for even counts).
    Published full-scale figures for the definitional single-context task are
    around MRR 0.07 / median rank 165.5 over a >250k-word vocabulary; those
    depend on corpus scale and are not desk-scale targets.
    """
    missing = [k for k in induced.keys() if k not in reference]
    if missing:
        raise CtxvecError(f"induced keys missing from reference: {', '.join(missing[:10])}")
    if induced.dim != reference.dim:
        raise CtxvecError(f"dims differ: induced {induced.dim}, reference {reference.dim}")
    ref_keys = np.array(reference.keys())
    ref = reference.matrix
    ref_norms = np.linalg.norm(ref, axis=1)
    ref_unit = np.divide(ref, ref_norms[:, None], out=np.zeros_like(ref), where=ref_norms[:, None] > 0)

    ranks = []
    for key, vec in induced.items():
        norm = np.linalg.norm(vec)
        unit = vec / norm if norm > 0 else vec
        sims = ref_unit @ unit
        self_idx = reference.index_of(key)
        self_sim = sims[self_idx]
        rank = 1 + int((sims > self_sim).sum())
        ties = (sims == self_sim) & (ref_keys < key)
        rank += int(ties.sum())
        ranks.append(rank)

    ranks_arr = np.sort(np.asarray(ranks, dtype=np.float64))
    n = len(ranks_arr)
    median = (
        ranks_arr[n // 2]
        if n % 2 == 1
        else (ranks_arr[n // 2 - 1] + ranks_arr[n // 2]) / 2.0
    )
    report = EvalReport()
    report.add("mrr", "overall", float(np.mean(1.0 / np.asarray(ranks))))
    report.add("median_rank", "overall", float(median))
    report.add("queries", "overall", n)
    return report


def disambiguate(
    context_line: str,
    candidate_features: Sequence[str],
    feature_vectors: EmbeddingStore,
    transform: Transform,
    word_vectors: EmbeddingStore,
) -> str:
    """Pick the candidate whose vector is most similar to the mapped context.

    The context vector is the transform applied to the sum of the line's
    in-store word embeddings. Ties break lexicographically.
    """
    if not candidate_features:
        raise CtxvecError("no candidate features")
    window = parse_feature_text(context_line)
    total = np.zeros(word_vectors.dim)
    seen = 0
    for tok in window.context_tokens():
        vec = word_vectors.get(tok)
        if vec is not None:
            total += vec
            seen += 1
    if seen == 0:
        raise CtxvecError("empty context: no in-vocabulary tokens")
    mapped = transform.matrix @ total
    best_key = None
    best_score = -np.inf
    for key in sorted(candidate_features):
        row = feature_vectors.get(key)
        if row is None:
            raise CtxvecError(f"candidate {key!r} has no feature vector")
        score = cosine(mapped, row)
        if score > best_score:
            best_score = score
            best_key = key
    return best_key


@dataclass
class ChimeraItem:
    """A blended pseudo-word: example sentences plus human-rated probe words."""

    key: str
    sentences: list[str]
    probes: list[str]
    ratings: list[float]


def read_chimera_tsv(lines: Iterable[str]) -> list[ChimeraItem]:
    """Parse the chimera layout: key<TAB>sentences@@-joined<TAB>probes,<TAB>ratings,."""
    items = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 4:
            raise FormatError(
                f"chimeras: line {lineno}: expected key, sentences, probes, ratings"
            )
        key, sentences, probes, ratings = parts
        probe_list = [p.strip() for p in probes.split(",") if p.strip()]
        try:
            rating_list = [float(r) for r in ratings.split(",") if r.strip()]
        except ValueError:
            raise FormatError(f"chimeras: line {lineno}: bad rating") from None
        if len(probe_list) != len(rating_list):
            raise FormatError(f"chimeras: line {lineno}: {len(probe_list)} probes "
                              f"vs {len(rating_list)} ratings")
        items.append(ChimeraItem(key, sentences.split("@@"), probe_list, rating_list))
    return items


def evaluate_chimeras(
    items: Sequence[ChimeraItem],
    inducer: str | Inducer,
    word_vectors: EmbeddingStore,
    transform: Transform | None = None,
    counts: Vocabulary | None = None,
    num_sentences: int | None = None,
) -> EvalReport:
    """Mean per-item Spearman between probe ratings and induced-probe cosine."""
    if isinstance(inducer, str):
        induce = make_inducer(inducer, word_vectors, transform, counts)
        name = inducer
    else:
        induce, name = inducer, "custom"
    rhos = []
    skipped = 0
    for item in items:
        sentences = item.sentences[:num_sentences] if num_sentences else item.sentences
        windows = [parse_feature_text(s) for s in sentences]
        vec = induce(item.key, windows)
        if vec is None:
            skipped += 1
            continue
        scores = []
        ratings = []
        for probe, rating in zip(item.probes, item.ratings):
            row = word_vectors.get(probe)
            if row is None:
                continue
            scores.append(cosine(vec, row))
            ratings.append(rating)
        if len(scores) < 2:
            skipped += 1
            continue
        rhos.append(spearman(ratings, scores))
    report = EvalReport()
    if rhos:
        report.add("spearman", f"{name} chimeras", float(np.mean(rhos)))
    report.add("items", name, len(rhos))
    report.add("items_skipped", name, skipped)
    return report
