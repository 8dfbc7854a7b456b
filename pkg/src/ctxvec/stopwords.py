"""Bundled English stop-word list.

Roughly 150 function words plus the contraction fragments produced by the
tokenizer (e.g. "don't" -> don ' t). Versioned so results citing stop-word
removal are reproducible; override with a file of one word per line.
"""

from __future__ import annotations

from pathlib import Path

STOPWORDS_VERSION = 1

STOPWORDS: frozenset[str] = frozenset(
    """
    a about above after again against all am an and any are as at back be
    because been before being below between both but by can could did do does
    doing down during each even few for from further had has have having he
    her here hers herself him himself his how i if in into is it its itself
    just like may me might more most much must my myself no nor not now of
    off on once only onto or other our ours ourselves out over own same shall
    she should so some such than that the their theirs them themselves then
    there these they this those through to too under until up upon us very
    was we were what when where which while who whom why will with within
    without would you your yours yourself yourselves
    s t d ll m o re ve y don didn doesn hasn haven isn wasn weren won wouldn
    """.split()
)


def load_stopword_file(path: str | Path) -> frozenset[str]:
    """Read an override list, one word per line; blank lines ignored."""
    words = set()
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            word = line.strip().lower()
            if word:
                words.add(word)
    return frozenset(words)
