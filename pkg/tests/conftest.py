import numpy as np
import pytest

from ctxvec import EmbeddingStore

FIXTURES = __file__.rsplit("/", 1)[0] + "/fixtures"


def make_store(pairs, kind="word"):
    dim = len(next(iter(pairs.values() if isinstance(pairs, dict) else dict(pairs).values())))
    items = pairs.items() if isinstance(pairs, dict) else pairs
    store = EmbeddingStore(dim, kind=kind)
    for key, vec in items:
        store.add(key, np.asarray(vec, dtype=float))
    return store


def random_store(rng, keys, dim, kind="word", scale=1.0):
    store = EmbeddingStore(dim, kind=kind)
    for key in keys:
        store.add(key, scale * rng.standard_normal(dim))
    return store


@pytest.fixture
def tiny_vectors():
    return make_store(
        {
            "the": (1.0, 0.0),
            "cat": (0.0, 1.0),
            "sat": (1.0, 1.0),
            "on": (0.0, 2.0),
            "mat": (2.0, 0.0),
            "dog": (1.0, 2.0),
            "a": (2.0, 1.0),
            "and": (0.0, 0.0),
        }
    )
