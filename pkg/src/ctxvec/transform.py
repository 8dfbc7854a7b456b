"""The learned context-to-feature transform.

The transform is the d x d matrix minimizing the count-weighted squared error
between pretrained word vectors and the matrix applied to their context
embeddings. It is solved through accumulated d x d normal equations (Gram and
cross-moment passes) followed by a symmetric positive-definite factorization,
so the full design matrix is never materialized twice: vocabulary size can
exceed 1e5 while d stays small.
"""

from __future__ import annotations

import hashlib
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .corpus import Vocabulary
from .embedstore import EmbeddingStore
from .errors import CtxvecError, DimensionMismatchError, FormatError
from .report import EvalReport

log = logging.getLogger(__name__)

TRANSFORM_MAGIC = b"ALCT"
TRANSFORM_VERSION = 1

_WEIGHT_TAGS = {"uniform": 0, "hard_threshold": 1, "log_count": 2}
_TAGS_WEIGHT = {v: k for k, v in _WEIGHT_TAGS.items()}

_CHUNK = 4096


@dataclass(frozen=True)
class WeightFunction:
    """Non-decreasing function of a token's corpus count, used per pair."""

    kind: str
    tau: int | None = None

    def __post_init__(self):
        if self.kind not in _WEIGHT_TAGS:
            raise CtxvecError(f"unknown weighting {self.kind!r}")
        if self.kind == "hard_threshold":
            if self.tau is None or self.tau < 1:
                raise CtxvecError("hard_threshold requires tau >= 1")
        elif self.tau is not None:
            raise CtxvecError(f"{self.kind} weighting takes no tau")

    @classmethod
    def uniform(cls) -> "WeightFunction":
        return cls("uniform")

    @classmethod
    def hard_threshold(cls, tau: int) -> "WeightFunction":
        return cls("hard_threshold", tau)

    @classmethod
    def log_count(cls) -> "WeightFunction":
        return cls("log_count")

    def __call__(self, count: int) -> float:
        if self.kind == "uniform":
            return 1.0
        if self.kind == "hard_threshold":
            return 1.0 if count >= self.tau else 0.0
        return math.log(count) if count >= 1 else 0.0


@dataclass(frozen=True)
class TransformMeta:
    weighting: WeightFunction
    window_size: int | None = None
    source_fingerprint: str = ""


@dataclass
class Transform:
    """d x d matrix mapping context embeddings into the word-vector space."""

    matrix: np.ndarray
    meta: TransformMeta

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise CtxvecError(f"transform matrix must be square, got {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise CtxvecError("non-finite entry in transform matrix")
        self.matrix = mat

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FitDiagnostics:
    weighted_mean_cosine: float
    pairs_used: int
    pairs_skipped: int


def _training_pairs(
    word_vectors: EmbeddingStore,
    context_vectors: EmbeddingStore,
    counts: Vocabulary | None,
    weight: WeightFunction,
) -> tuple[list[str], np.ndarray]:
    if word_vectors.dim != context_vectors.dim:
        raise DimensionMismatchError(
            f"stores have dims {word_vectors.dim} and {context_vectors.dim}"
        )
    if weight.kind != "uniform" and counts is None:
        raise CtxvecError(f"{weight.kind} weighting requires corpus counts")
    keys = []
    alphas = []
    for key in context_vectors.keys():
        if key not in word_vectors:
            continue
        alpha = weight(counts.count(key)) if counts is not None else weight(1)
        if alpha > 0.0:
            keys.append(key)
            alphas.append(alpha)
    if not keys:
        raise CtxvecError("no training pairs: shared key set is empty after weighting")
    return keys, np.asarray(alphas)


def learn_transform(
    word_vectors: EmbeddingStore,
    context_vectors: EmbeddingStore,
    counts: Vocabulary | None,
    weight: WeightFunction,
    conditioning_ridge: float = 1e-8,
    window_size: int | None = None,
) -> tuple[Transform, FitDiagnostics]:
    """Solve the weighted regression of word vectors onto context embeddings.

    conditioning_ridge scales a diagonal shift lambda = ridge * trace(G)/d on
    the Gram matrix G; it exists for numerical conditioning, not statistical
    regularization, and defaults to 1e-8. With ridge 0 a singular Gram matrix
    raises an error advising a positive value.
    """
    if conditioning_ridge < 0:
        raise CtxvecError("conditioning_ridge must be >= 0")
    keys, alphas = _training_pairs(word_vectors, context_vectors, counts, weight)
    dim = word_vectors.dim
    if len(keys) < dim:
        log.warning(
            "only %d weighted training pairs for dimension %d; fit may be degenerate",
            len(keys),
            dim,
        )

    gram = np.zeros((dim, dim))
    cross = np.zeros((dim, dim))
    fingerprint = hashlib.blake2b(digest_size=16)
    fingerprint.update(struct.pack("<II", dim, len(keys)))
    for lo in range(0, len(keys), _CHUNK):
        chunk = keys[lo : lo + _CHUNK]
        a = alphas[lo : lo + _CHUNK]
        ctx = np.stack([context_vectors.vector(k) for k in chunk])
        tgt = np.stack([word_vectors.vector(k) for k in chunk])
        weighted = ctx * a[:, None]
        gram += weighted.T @ ctx
        cross += tgt.T @ weighted
        for k in chunk:
            fingerprint.update(k.encode("utf-8"))
            fingerprint.update(b"\x00")

    lam = conditioning_ridge * np.trace(gram) / dim
    shifted = gram + lam * np.eye(dim)
    try:
        factor = cho_factor(shifted)
    except LinAlgError:
        hint = "; rerun with conditioning_ridge > 0" if conditioning_ridge == 0 else ""
        raise CtxvecError(f"normal matrix is singular{hint}") from None
    matrix = cho_solve(factor, cross.T).T

    meta = TransformMeta(
        weighting=weight,
        window_size=window_size,
        source_fingerprint=fingerprint.hexdigest(),
    )
    transform = Transform(matrix, meta)
    diagnostics = _fit_diagnostics(transform, word_vectors, context_vectors, keys, alphas)
    return transform, diagnostics


def _fit_diagnostics(
    transform: Transform,
    word_vectors: EmbeddingStore,
    context_vectors: EmbeddingStore,
    keys: Sequence[str],
    alphas: np.ndarray,
) -> FitDiagnostics:
    total = 0.0
    weight_total = 0.0
    skipped = 0
    for lo in range(0, len(keys), _CHUNK):
        chunk = keys[lo : lo + _CHUNK]
        a = alphas[lo : lo + _CHUNK]
        ctx = np.stack([context_vectors.vector(k) for k in chunk])
        tgt = np.stack([word_vectors.vector(k) for k in chunk])
        mapped = ctx @ transform.matrix.T
        mn = np.linalg.norm(mapped, axis=1)
        tn = np.linalg.norm(tgt, axis=1)
        ok = (mn > 0) & (tn > 0)
        skipped += int((~ok).sum())
        cos = np.einsum("ij,ij->i", mapped[ok], tgt[ok]) / (mn[ok] * tn[ok])
        total += float((a[ok] * cos).sum())
        weight_total += float(a[ok].sum())
    mean = total / weight_total if weight_total > 0 else 0.0
    return FitDiagnostics(mean, len(keys) - skipped, skipped)


def apply_transform(transform: Transform, feature_context_vectors: EmbeddingStore) -> EmbeddingStore:
    """Map every context embedding through the transform; keys preserved."""
    if transform.dim != feature_context_vectors.dim:
        raise DimensionMismatchError(
            f"transform dim {transform.dim} != store dim {feature_context_vectors.dim}"
        )
    mapped = feature_context_vectors.matrix @ transform.matrix.T
    out = EmbeddingStore(transform.dim, kind="feature")
    for i, key in enumerate(feature_context_vectors.keys()):
        out.add(key, mapped[i])
    return out


def split_keys(
    keys: Iterable[str], holdout_fraction: float, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Deterministic train/holdout split by seeded hash of each key.

    Stable across runs and processes: assignment depends only on (key, seed).
    """
    if not 0 <= holdout_fraction < 1:
        raise CtxvecError("holdout_fraction must be in [0, 1)")
    train, hold = [], []
    salt = struct.pack("<q", seed)
    for key in keys:
        digest = hashlib.blake2b(key.encode("utf-8"), key=salt, digest_size=8).digest()
        frac = int.from_bytes(digest, "little") / 2**64
        (hold if frac < holdout_fraction else train).append(key)
    return train, hold


def fit_report(
    transform: Transform,
    word_vectors: EmbeddingStore,
    context_vectors: EmbeddingStore,
    holdout_fraction: float = 0.0,
    seed: int = 0,
) -> EvalReport:
    """Mean cosine between mapped context embeddings and word vectors.

    Reported on the train split and, when holdout_fraction > 0, on the
    held-out split of the shared key set (same seeded hash split as
    split_keys, so a transform learned on the train side is scored on truly
    unseen keys). Cosines here are unweighted; the weighted figure lives in
    the learn-time diagnostics. Zero-vector pairs are skipped and counted.
    """
    shared = [k for k in context_vectors.keys() if k in word_vectors]
    if not shared:
        raise CtxvecError("no shared keys between stores")
    train, hold = split_keys(shared, holdout_fraction, seed)
    report = EvalReport()
    for name, subset in (("train", train), ("holdout", hold)):
        if not subset:
            continue
        cos_sum = 0.0
        used = 0
        skipped = 0
        for key in subset:
            mapped = transform.matrix @ context_vectors.vector(key)
            tgt = word_vectors.vector(key)
            mn, tn = np.linalg.norm(mapped), np.linalg.norm(tgt)
            if mn == 0 or tn == 0:
                skipped += 1
                continue
            cos_sum += float(mapped @ tgt / (mn * tn))
            used += 1
        if used:
            report.add("fit_cosine", name, cos_sum / used)
        report.add("pairs", name, used)
        if skipped:
            report.add("pairs_skipped", name, skipped)
    return report


def save_transform(transform: Transform, path: str | Path) -> None:
    """Binary serialization: magic, version, dim, weighting, window, matrix.

    The matrix round-trips at full f64 precision. The source fingerprint is
    appended as a length-prefixed trailer after the matrix.
    """
    weight = transform.meta.weighting
    try:
        with open(path, "wb") as out:
            out.write(TRANSFORM_MAGIC)
            out.write(struct.pack("<I", TRANSFORM_VERSION))
            out.write(struct.pack("<I", transform.dim))
            out.write(struct.pack("<B", _WEIGHT_TAGS[weight.kind]))
            if weight.kind == "hard_threshold":
                out.write(struct.pack("<Q", weight.tau))
            out.write(struct.pack("<I", transform.meta.window_size or 0))
            out.write(np.ascontiguousarray(transform.matrix, dtype="<f8").tobytes())
            raw = transform.meta.source_fingerprint.encode("utf-8")
            out.write(struct.pack("<I", len(raw)))
            out.write(raw)
    except OSError as exc:
        raise CtxvecError(f"cannot write transform to {path}: {exc}") from exc


def _read_exact(handle, n: int, path) -> bytes:
    data = handle.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated at offset {handle.tell() - len(data)}")
    return data


def load_transform(path: str | Path, expected_dim: int | None = None) -> Transform:
    with open(path, "rb") as handle:
        magic = _read_exact(handle, 4, path)
        if magic != TRANSFORM_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {TRANSFORM_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(handle, 4, path))
        if version != TRANSFORM_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        (dim,) = struct.unpack("<I", _read_exact(handle, 4, path))
        if expected_dim is not None and dim != expected_dim:
            raise FormatError(f"{path}: dimension {dim}, expected {expected_dim}")
        if dim < 1:
            raise FormatError(f"{path}: bad dimension {dim}")
        (tag,) = struct.unpack("<B", _read_exact(handle, 1, path))
        if tag not in _TAGS_WEIGHT:
            raise FormatError(f"{path}: unknown weighting tag {tag}")
        tau = None
        if _TAGS_WEIGHT[tag] == "hard_threshold":
            (tau,) = struct.unpack("<Q", _read_exact(handle, 8, path))
        (window,) = struct.unpack("<I", _read_exact(handle, 4, path))
        matrix = np.frombuffer(
            _read_exact(handle, 8 * dim * dim, path), dtype="<f8"
        ).reshape(dim, dim)
        fingerprint = ""
        trailer = handle.read(4)
        if len(trailer) == 4:
            (fplen,) = struct.unpack("<I", trailer)
            fingerprint = _read_exact(handle, fplen, path).decode("utf-8")
    meta = TransformMeta(
        weighting=WeightFunction(_TAGS_WEIGHT[tag], tau),
        window_size=window or None,
        source_fingerprint=fingerprint,
    )
    return Transform(matrix.copy(), meta)
