"""Dense embedding stores and their text / binary-cache serializations.

Text format (canonical): one record per line, `key value1 ... value_d` with
space separators and decimal floats at 6 significant digits. Binary cache:
little-endian, magic "ALC1", u32 dim, u64 count, then records of
(u32 key-length, key bytes, d x f32).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import CtxvecError, DimensionMismatchError, FormatError

BINARY_MAGIC = b"ALC1"


class EmbeddingStore:
    """Mapping from string keys to fixed-dimension float vectors.

    Immutable once populated; all vectors are finite and exactly `dim` wide.
    kind is "word" for pretrained token vectors and "feature" for induced or
    context vectors.
    """

    def __init__(self, dim: int, kind: str = "word"):
        if dim < 1:
            raise CtxvecError("embedding dimension must be >= 1")
        if kind not in ("word", "feature"):
            raise CtxvecError(f"unknown store kind {kind!r}")
        self.dim = int(dim)
        self.kind = kind
        self._keys: list[str] = []
        self._index: dict[str, int] = {}
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[str, np.ndarray]], dim: int, kind: str = "word"
    ) -> "EmbeddingStore":
        store = cls(dim, kind)
        for key, vec in pairs:
            store.add(key, vec)
        return store

    def add(self, key: str, vector: np.ndarray) -> None:
        if not key:
            raise CtxvecError("empty embedding key")
        if key in self._index:
            raise CtxvecError(f"duplicate embedding key {key!r}")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatchError(
                f"vector for {key!r} has {vec.size} components, expected {self.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise CtxvecError(f"non-finite value in vector for {key!r}")
        self._index[key] = len(self._keys)
        self._keys.append(key)
        self._rows.append(vec)
        self._matrix = None

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def keys(self) -> list[str]:
        return list(self._keys)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for key, row in zip(self._keys, self._rows):
            yield key, row

    def vector(self, key: str) -> np.ndarray:
        return self._rows[self._index[key]]

    def get(self, key: str) -> np.ndarray | None:
        idx = self._index.get(key)
        return None if idx is None else self._rows[idx]

    def index_of(self, key: str) -> int:
        return self._index[key]

    @property
    def matrix(self) -> np.ndarray:
        """(n, dim) float64 matrix in insertion order. Cached; do not mutate."""
        if self._matrix is None:
            if self._rows:
                self._matrix = np.vstack(self._rows)
            else:
                self._matrix = np.zeros((0, self.dim))
        return self._matrix


def _format_value(x: float) -> str:
    return f"{x:.6g}"


def save_text_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write a store in the text format, keys in insertion order.

    Keys containing whitespace are rejected: the format is space-delimited.
    N-gram keys are expected to already be underscore-joined.
    """
    for key in store.keys():
        if any(ch.isspace() for ch in key):
            raise CtxvecError(f"key {key!r} contains whitespace; not serializable")
    try:
        with open(path, "w", encoding="utf-8") as out:
            for key, vec in store.items():
                out.write(key + " " + " ".join(_format_value(x) for x in vec) + "\n")
    except OSError as exc:
        raise CtxvecError(f"cannot write embeddings to {path}: {exc}") from exc


def load_text_embeddings(
    path: str | Path, expected_dim: int | None = None, kind: str = "word"
) -> EmbeddingStore:
    """Load the text format; dim is inferred from the first record if not given."""
    store: EmbeddingStore | None = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            parts = line.split()
            if not parts:
                continue
            key, values = parts[0], parts[1:]
            if store is None:
                dim = expected_dim if expected_dim is not None else len(values)
                if dim < 1:
                    raise FormatError(f"{path}: line {lineno}: no vector components")
                store = EmbeddingStore(dim, kind)
            if len(values) != store.dim:
                raise FormatError(
                    f"{path}: line {lineno}: {len(values)} components, expected {store.dim}"
                )
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: unparseable value") from None
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}: line {lineno}: non-finite value")
            if key in store:
                raise FormatError(f"{path}: line {lineno}: duplicate key {key!r}")
            store.add(key, vec)
    if store is None or len(store) == 0:
        raise FormatError(f"{path}: no vectors")
    return store


def save_binary_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write the binary cache format (f32 records; text remains canonical)."""
    try:
        with open(path, "wb") as out:
            out.write(BINARY_MAGIC)
            out.write(struct.pack("<I", store.dim))
            out.write(struct.pack("<Q", len(store)))
            for key, vec in store.items():
                raw = key.encode("utf-8")
                out.write(struct.pack("<I", len(raw)))
                out.write(raw)
                out.write(vec.astype("<f4").tobytes())
    except OSError as exc:
        raise CtxvecError(f"cannot write embeddings to {path}: {exc}") from exc


def _read_exact(handle, n: int, path) -> bytes:
    data = handle.read(n)
    if len(data) != n:
        raise FormatError(f"{path}: truncated at offset {handle.tell() - len(data)}")
    return data


def load_binary_embeddings(
    path: str | Path, expected_dim: int | None = None, kind: str = "word"
) -> EmbeddingStore:
    with open(path, "rb") as handle:
        magic = _read_exact(handle, 4, path)
        if magic != BINARY_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {BINARY_MAGIC!r}")
        (dim,) = struct.unpack("<I", _read_exact(handle, 4, path))
        (count,) = struct.unpack("<Q", _read_exact(handle, 8, path))
        if expected_dim is not None and dim != expected_dim:
            raise FormatError(f"{path}: dimension {dim}, expected {expected_dim}")
        if dim < 1:
            raise FormatError(f"{path}: bad dimension {dim}")
        store = EmbeddingStore(dim, kind)
        for _ in range(count):
            (keylen,) = struct.unpack("<I", _read_exact(handle, 4, path))
            key = _read_exact(handle, keylen, path).decode("utf-8")
            vec = np.frombuffer(_read_exact(handle, 4 * dim, path), dtype="<f4")
            if key in store:
                raise FormatError(f"{path}: duplicate key {key!r}")
            store.add(key, vec.astype(np.float64))
    if len(store) == 0:
        raise FormatError(f"{path}: no vectors")
    return store


def load_embeddings(
    path: str | Path, expected_dim: int | None = None, kind: str = "word"
) -> EmbeddingStore:
    """Load either format, sniffing the binary cache by its magic bytes."""
    with open(path, "rb") as probe:
        magic = probe.read(4)
    if magic == BINARY_MAGIC:
        return load_binary_embeddings(path, expected_dim, kind)
    return load_text_embeddings(path, expected_dim, kind)


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    """Write text format, or the binary cache when the path ends in ".bin"."""
    if str(path).endswith(".bin"):
        save_binary_embeddings(store, path)
    else:
        save_text_embeddings(store, path)
