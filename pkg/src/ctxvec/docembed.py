"""Document embeddings from induced n-gram vectors.

A document's representation is the concatenation over orders n = 1..N of the
1/n-weighted sum of its n-gram vectors; the down-weighting reflects that
higher-order n-grams occur less often and carry noisier vectors. Unknown
n-grams contribute the zero vector (never silently renormalized) and are
tracked in a coverage statistic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import join_ngram_key, tokenize
from .embedstore import EmbeddingStore
from .errors import CtxvecError, DimensionMismatchError, FormatError

log = logging.getLogger(__name__)


@dataclass
class LabeledDocument:
    label: str
    tokens: list[str]

    @classmethod
    def from_text(cls, label: str, text: str) -> "LabeledDocument":
        return cls(label, tokenize(text))


@dataclass
class DocumentEmbedding:
    vector: np.ndarray
    orders: int


class CoverageTally:
    """Counts n-gram slots and how many had a known vector, per order."""

    def __init__(self, orders: int):
        self.slots = np.zeros(orders, dtype=np.int64)
        self.hits = np.zeros(orders, dtype=np.int64)

    def fraction(self, order: int) -> float:
        if self.slots[order - 1] == 0:
            return 0.0
        return self.hits[order - 1] / self.slots[order - 1]


def _check_stores(stores: Sequence[EmbeddingStore]) -> int:
    if not stores:
        raise CtxvecError("at least one n-gram store is required")
    dim = stores[0].dim
    for i, store in enumerate(stores[1:], 2):
        if store.dim != dim:
            raise DimensionMismatchError(
                f"store for order {i} has dim {store.dim}, expected {dim}"
            )
    return dim


def embed_document(
    doc: LabeledDocument,
    stores: Sequence[EmbeddingStore],
    tally: CoverageTally | None = None,
) -> DocumentEmbedding:
    """Concatenate 1/n-weighted n-gram vector sums, orders 1..len(stores).

    Documents shorter than n yield a zero block for order n.
    """
    dim = _check_stores(stores)
    orders = len(stores)
    blocks = np.zeros((orders, dim))
    tokens = doc.tokens
    for order_idx, store in enumerate(stores):
        n = order_idx + 1
        for t in range(len(tokens) - n + 1):
            key = tokens[t] if n == 1 else join_ngram_key(tokens[t : t + n])
            vec = store.get(key)
            if tally is not None:
                tally.slots[order_idx] += 1
                if vec is not None:
                    tally.hits[order_idx] += 1
            if vec is not None:
                blocks[order_idx] += vec
        blocks[order_idx] /= n
    return DocumentEmbedding(blocks.reshape(-1), orders)


def embed_corpus(
    docs: Iterable[LabeledDocument],
    stores: Sequence[EmbeddingStore],
    normalize: bool = False,
    combine: str = "concat",
) -> tuple[np.ndarray, list[str], "EvalReport"]:
    """Embed a document stream; row order matches input order.

    combine "concat" keeps the per-order blocks side by side (dim N*d);
    "sum" adds the blocks into a single d-dimensional vector. Returns the
    matrix, the label list, and a per-order coverage report.
    """
    from .report import EvalReport

    if combine not in ("concat", "sum"):
        raise CtxvecError(f"unknown combine mode {combine!r}")
    dim = _check_stores(stores)
    orders = len(stores)
    tally = CoverageTally(orders)
    rows = []
    labels = []
    for idx, doc in enumerate(docs):
        if not doc.tokens:
            log.warning("document %d (%s) has no tokens", idx, doc.label)
        try:
            emb = embed_document(doc, stores, tally)
        except CtxvecError as exc:
            raise CtxvecError(f"document {idx}: {exc}") from exc
        vec = emb.vector
        if combine == "sum":
            vec = vec.reshape(orders, dim).sum(axis=0)
        if normalize:
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec = vec / norm
        rows.append(vec)
        labels.append(doc.label)
    width = orders * dim if combine == "concat" else dim
    matrix = np.vstack(rows) if rows else np.zeros((0, width))
    if not labels:
        log.warning("empty document stream")
    report = EvalReport()
    for n in range(1, orders + 1):
        report.add("coverage", f"n={n}", tally.fraction(n))
        report.add("ngram_slots", f"n={n}", int(tally.slots[n - 1]))
    return matrix, labels, report


def read_documents(lines: Iterable[str]) -> list[LabeledDocument]:
    """Parse the documents file: `label<TAB>raw text`, one document per line."""
    docs = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise FormatError(f"documents: line {lineno}: expected label<TAB>text")
        label, text = line.split("\t", 1)
        docs.append(LabeledDocument.from_text(label, text))
    return docs


def save_matrix_tsv(matrix: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        for row in matrix:
            out.write("\t".join(f"{x:.6g}" for x in row) + "\n")


def load_matrix_tsv(path: str | Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            if not line.strip():
                continue
            values = [float(v) for v in line.split("\t")]
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise FormatError(f"{path}: line {lineno}: ragged row")
            rows.append(values)
    if not rows:
        raise FormatError(f"{path}: empty matrix")
    return np.array(rows)


def save_labels(labels: Sequence[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as out:
        for label in labels:
            out.write(label + "\n")


def load_labels(path: str | Path) -> list[str]:
    with open(path, "r", encoding="utf-8") as handle:
        return [line.rstrip("\n") for line in handle if line.strip()]
