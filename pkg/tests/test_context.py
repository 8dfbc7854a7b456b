import numpy as np
import pytest

from ctxvec import (
    ContextAccumulator,
    ContextWindow,
    CtxvecError,
    accumulate,
    accumulate_lines,
    baseline_additive,
    baseline_sif_weighted,
    build_vocabulary,
    finalize,
    parse_feature_text,
    principal_directions,
    read_feature_contexts,
    remove_top_components,
    scan_word_contexts,
)
from ctxvec.stopwords import STOPWORDS, STOPWORDS_VERSION, load_stopword_file

from conftest import make_store, random_store


def window(left=(), right=(), span=("x",), size=10):
    return ContextWindow(tuple(span), tuple(left), tuple(right), size)


def random_corpus(rng, n_lines, alphabet="abcdef", max_len=9):
    return [
        " ".join(rng.choice(list(alphabet), size=rng.integers(1, max_len)))
        for _ in range(n_lines)
    ]


class TestAccumulate:
    def test_single_window(self):
        store = make_store({"b": (1.0, 0.0)})
        acc = accumulate([("a", window(right=("b",)))], store)
        [(key, vec, count)] = list(acc.entries())
        assert key == "a" and count == 1
        assert np.array_equal(vec, [1.0, 0.0])

    def test_additivity_over_windows(self):
        store = make_store({"b": (1.0, 0.0), "c": (0.0, 2.0)})
        acc = accumulate(
            [("a", window(right=("b",))), ("a", window(right=("c",)))], store
        )
        [(_, vec, count)] = list(acc.entries())
        assert count == 2
        assert np.array_equal(vec, [1.0, 2.0])

    def test_all_oov_window_still_counts(self):
        store = make_store({"b": (1.0, 0.0)})
        acc = accumulate([("a", window(right=("zzz",)))], store)
        [(_, vec, count)] = list(acc.entries())
        assert count == 1
        assert np.array_equal(vec, [0.0, 0.0])

    def test_include_target_adds_span(self):
        store = make_store({"a": (1.0, 1.0), "b": (1.0, 0.0)})
        acc = accumulate([("a", window(right=("b",), span=("a",)))], store, include_target=True)
        [(_, vec, _)] = list(acc.entries())
        assert np.array_equal(vec, [2.0, 1.0])

    def test_requires_word_store(self):
        store = make_store({"b": (1.0, 0.0)}, kind="feature")
        with pytest.raises(CtxvecError):
            accumulate([], store)

    def test_merge_dim_mismatch(self):
        with pytest.raises(CtxvecError):
            ContextAccumulator(2).merge(ContextAccumulator(3))


class TestFinalize:
    def test_divides_by_count(self):
        acc = ContextAccumulator(2)
        acc.add("a", np.array([2.0, 4.0]), 2)
        store = finalize(acc)
        assert np.array_equal(store.vector("a"), [1.0, 2.0])

    def test_zero_count_omitted(self):
        acc = ContextAccumulator(2)
        acc.add("a", np.zeros(2), 0)
        acc.add("b", np.array([1.0, 1.0]), 1)
        store = finalize(acc)
        assert "a" not in store and "b" in store
        assert acc.zero_count_keys() == ["a"]

    def test_merge_then_finalize_equals_concatenated_stream(self):
        rng = np.random.default_rng(11)
        store = random_store(rng, list("abcdef"), 3)
        lines = random_corpus(rng, 40)
        vocab = build_vocabulary(lines, 1)
        windows = [
            (vocab.token(i), w) for i, w in scan_word_contexts(lines, vocab, 2)
        ]
        whole = finalize(accumulate(windows, store))
        acc1 = accumulate(windows[:37], store)
        acc2 = accumulate(windows[37:], store)
        acc1.merge(acc2)
        merged = finalize(acc1)
        assert set(whole.keys()) == set(merged.keys())
        for key in whole.keys():
            np.testing.assert_allclose(
                merged.vector(key), whole.vector(key), rtol=1e-10, atol=1e-12
            )

    def test_emission_order_invariance(self):
        rng = np.random.default_rng(5)
        store = random_store(rng, list("abc"), 2)
        lines = random_corpus(rng, 25, alphabet="abc")
        vocab = build_vocabulary(lines, 1)
        windows = [(vocab.token(i), w) for i, w in scan_word_contexts(lines, vocab, 2)]
        base = finalize(accumulate(windows, store))
        shuffled = list(windows)
        rng.shuffle(shuffled)
        other = finalize(accumulate(shuffled, store))
        for key in base.keys():
            np.testing.assert_allclose(
                other.vector(key), base.vector(key), rtol=1e-10, atol=1e-12
            )


class TestFusedAccumulation:
    @pytest.mark.parametrize("include_target", [False, True])
    def test_matches_reference_path(self, include_target):
        rng = np.random.default_rng(17)
        store = random_store(rng, list("abcdefg"), 4)
        lines = random_corpus(rng, 60, alphabet="abcdefghij")  # some OOV tokens
        vocab = build_vocabulary(lines, 2)
        ref = finalize(
            accumulate(
                ((vocab.token(i), w) for i, w in scan_word_contexts(lines, vocab, 3)),
                store,
                include_target,
            )
        )
        fused = finalize(accumulate_lines(lines, store, vocab, 3, include_target))
        assert set(ref.keys()) == set(fused.keys())
        for key in ref.keys():
            np.testing.assert_allclose(
                fused.vector(key), ref.vector(key), rtol=1e-10, atol=1e-12
            )

    def test_thread_count_never_changes_bits(self):
        rng = np.random.default_rng(23)
        store = random_store(rng, list("abcde"), 6)
        lines = random_corpus(rng, 300, alphabet="abcde")
        vocab = build_vocabulary(lines, 1)
        single = finalize(accumulate_lines(lines, store, vocab, 4, threads=1, shard_lines=64))
        pooled = finalize(accumulate_lines(lines, store, vocab, 4, threads=8, shard_lines=64))
        assert single.keys() == pooled.keys()
        for key in single.keys():
            assert np.array_equal(single.vector(key), pooled.vector(key))


class TestBaselineAdditive:
    def test_per_window_mean(self):
        store = make_store({"b": (2.0, 0.0), "c": (0.0, 2.0)})
        out = baseline_additive([("f", window(right=("b", "c")))], store)
        assert np.allclose(out.vector("f"), [1.0, 1.0])

    def test_stopword_dropped(self):
        store = make_store({"b": (2.0, 0.0), "c": (0.0, 2.0)})
        out = baseline_additive(
            [("f", window(right=("b", "c")))],
            store,
            drop_stopwords=True,
            stopword_list=frozenset({"c"}),
        )
        assert np.allclose(out.vector("f"), [2.0, 0.0])

    def test_average_over_windows(self):
        store = make_store({"b": (2.0, 0.0), "c": (0.0, 2.0)})
        out = baseline_additive(
            [("f", window(right=("b",))), ("f", window(right=("c",)))], store
        )
        assert np.allclose(out.vector("f"), [1.0, 1.0])

    def test_zero_usable_window_not_counted(self):
        store = make_store({"b": (2.0, 0.0)})
        out = baseline_additive(
            [("f", window(right=("zzz",))), ("f", window(right=("b",)))], store
        )
        # effective |C_f| is 1: the all-OOV window neither adds nor counts
        assert np.allclose(out.vector("f"), [2.0, 0.0])

    def test_key_with_no_usable_windows_omitted(self):
        store = make_store({"b": (2.0, 0.0)})
        out = baseline_additive([("f", window(right=("zzz",)))], store)
        assert "f" not in out

    def test_norm_off_equals_plain_accumulation(self):
        # holds on windows with at least one usable token
        rng = np.random.default_rng(29)
        store = random_store(rng, list("abcd"), 3)
        lines = random_corpus(rng, 30, alphabet="abcd", max_len=6)
        vocab = build_vocabulary(lines, 1)
        windows = [(vocab.token(i), w) for i, w in scan_word_contexts(lines, vocab, 2)]
        windows = [(k, w) for k, w in windows if w.context_tokens()]
        ours = baseline_additive(windows, store, per_window_norm=False)
        plain = finalize(accumulate(windows, store))
        assert set(ours.keys()) == set(plain.keys())
        for key in ours.keys():
            assert np.array_equal(ours.vector(key), plain.vector(key))


class TestBaselineSif:
    def test_uniform_counts_parallel_to_additive_sum(self):
        store = make_store({"b": (2.0, 0.0), "c": (0.0, 2.0)})
        counts = build_vocabulary(["b c", "b c"], min_count=1)
        windows = [("f", window(right=("b", "c")))]
        sif = baseline_sif_weighted(windows, store, counts, a=1e-3)
        add = baseline_additive(windows, store, per_window_norm=False)
        cos = sif.vector("f") @ add.vector("f") / (
            np.linalg.norm(sif.vector("f")) * np.linalg.norm(add.vector("f"))
        )
        assert cos == pytest.approx(1.0, abs=1e-12)

    def test_weight_formula(self):
        # oracle: recompute a/(a+p) by hand for each token
        store = make_store({"b": (1.0, 0.0), "c": (0.0, 1.0)})
        counts = build_vocabulary(["b b b c"], min_count=1)  # p(b)=3/4, p(c)=1/4
        a = 0.5
        out = baseline_sif_weighted([("f", window(right=("b", "c")))], store, counts, a=a)
        expected = np.array([a / (a + 0.75), a / (a + 0.25)])
        np.testing.assert_allclose(out.vector("f"), expected, rtol=1e-12)

    def test_unknown_token_weight_one(self):
        store = make_store({"zzz": (1.0, 0.0)})
        counts = build_vocabulary(["b"], min_count=1)
        out = baseline_sif_weighted([("f", window(right=("zzz",)))], store, counts)
        np.testing.assert_allclose(out.vector("f"), [1.0, 0.0])

    def test_nonpositive_a_rejected(self):
        store = make_store({"b": (1.0, 0.0)})
        counts = build_vocabulary(["b"], min_count=1)
        with pytest.raises(CtxvecError):
            baseline_sif_weighted([], store, counts, a=0.0)


class TestRemoveTopComponents:
    def test_parallel_vectors_vanish(self):
        direction = np.array([3.0, 4.0, 0.0]) / 5.0
        store = make_store({f"k{i}": (i + 1) * direction for i in range(5)})
        out = remove_top_components(store, 1)
        assert max(np.linalg.norm(v) for _, v in out.items()) < 1e-8

    def test_orthogonal_vector_unchanged(self):
        store = make_store(
            {
                "a": (5.0, 0.0, 0.0),
                "b": (3.0, 0.0, 0.0),
                "c": (0.0, 0.0, 1.0),
            }
        )
        out = remove_top_components(store, 1)
        np.testing.assert_allclose(out.vector("c"), [0.0, 0.0, 1.0], atol=1e-9)

    def test_matches_gram_eigendecomposition_oracle(self):
        rng = np.random.default_rng(41)
        matrix = rng.standard_normal((5, 6))
        store = make_store({f"k{i}": matrix[i] for i in range(5)})
        out = remove_top_components(store, 2)
        # oracle: eigendecompose the 5x5 Gram matrix, map to right singular
        # directions, project with a dense subtraction
        gram = matrix @ matrix.T
        eigvals, eigvecs = np.linalg.eigh(gram)
        top = eigvecs[:, ::-1][:, :2]
        dirs = matrix.T @ top / np.sqrt(eigvals[::-1][:2])
        expected = matrix - matrix @ dirs @ dirs.T
        for i in range(5):
            np.testing.assert_allclose(out.vector(f"k{i}"), expected[i], atol=1e-6)

    def test_projection_idempotent(self):
        rng = np.random.default_rng(43)
        matrix = rng.standard_normal((8, 5))
        store = make_store({f"k{i}": matrix[i] for i in range(8)})
        dirs = principal_directions(store, 2)
        once = matrix - (matrix @ dirs.T) @ dirs
        twice = once - (once @ dirs.T) @ dirs
        np.testing.assert_allclose(twice, once, atol=1e-8)

    def test_degenerate_spectrum_errors(self):
        store = make_store({"a": (1.0, 0.0, 0.0), "b": (2.0, 0.0, 0.0)})
        with pytest.raises(CtxvecError, match="component 2"):
            remove_top_components(store, 2)

    def test_k_bounds(self):
        store = make_store({"a": (1.0, 0.0)})
        with pytest.raises(CtxvecError):
            remove_top_components(store, 0)
        with pytest.raises(CtxvecError):
            remove_top_components(store, 2)

    def test_deterministic(self):
        rng = np.random.default_rng(47)
        matrix = rng.standard_normal((6, 4))
        store = make_store({f"k{i}": matrix[i] for i in range(6)})
        a = remove_top_components(store, 2)
        b = remove_top_components(store, 2)
        for key in a.keys():
            assert np.array_equal(a.vector(key), b.vector(key))


class TestFeatureContexts:
    def test_tagged_span_excluded(self):
        w = parse_feature_text("the <feat>blick</feat> sat")
        assert w.feature_span == ("blick",)
        assert w.left == ("the",) and w.right == ("sat",)

    def test_untagged_line_is_all_context(self):
        w = parse_feature_text("just words here")
        assert w.feature_span == ()
        assert w.left == ("just", "words", "here") and w.right == ()

    def test_multiword_span(self):
        w = parse_feature_text("a <feat>harry potter</feat> b")
        assert w.feature_span == ("harry", "potter")

    def test_tsv_parse(self):
        rows = list(read_feature_contexts(["f1\tthe <feat>x</feat> cat", "f2\tdog"]))
        assert rows[0][0] == "f1" and rows[1][0] == "f2"

    def test_missing_tab_errors(self):
        with pytest.raises(CtxvecError, match="line 1"):
            list(read_feature_contexts(["no tab here"]))

    def test_roundtrip_through_accumulate(self, tiny_vectors):
        rows = read_feature_contexts(["f1\tthe <feat>x</feat> cat", "f1\ton a mat"])
        store = finalize(accumulate(rows, tiny_vectors))
        # window 1: the+cat = (1,1); window 2: on+a+mat = (4,3); mean (2.5, 2)
        np.testing.assert_allclose(store.vector("f1"), [2.5, 2.0])


class TestStopwords:
    def test_versioned_and_sized(self):
        assert STOPWORDS_VERSION == 1
        assert 120 <= len(STOPWORDS) <= 200
        assert "the" in STOPWORDS and "cat" not in STOPWORDS

    def test_override_file(self, tmp_path):
        path = tmp_path / "stops.txt"
        path.write_text("Foo\nbar\n\n")
        assert load_stopword_file(path) == frozenset({"foo", "bar"})
