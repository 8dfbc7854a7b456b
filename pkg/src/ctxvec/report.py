"""Tabular metric reports, serialized as metric<TAB>condition<TAB>value."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterator

from .errors import CtxvecError


class EvalReport:
    """Rows of (metric, condition, value); values must be finite.

    Rows are kept in insertion order but emitted sorted, so reports assembled
    from unordered parallel work serialize identically.
    """

    def __init__(self):
        self._rows: list[tuple[str, str, float]] = []

    def add(self, metric: str, condition: str, value: float) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise CtxvecError(f"non-finite report value for {metric}/{condition}")
        self._rows.append((metric, condition, value))

    def extend(self, other: "EvalReport") -> None:
        self._rows.extend(other._rows)

    def __len__(self) -> int:
        return len(self._rows)

    def __iter__(self) -> Iterator[tuple[str, str, float]]:
        return iter(self._rows)

    def value(self, metric: str, condition: str = "") -> float:
        for m, c, v in self._rows:
            if m == metric and c == condition:
                return v
        raise KeyError(f"{metric}/{condition}")

    def to_tsv(self) -> str:
        lines = [f"{m}\t{c}\t{v:.6g}" for m, c, v in sorted(self._rows)]
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as out:
            out.write(self.to_tsv())
