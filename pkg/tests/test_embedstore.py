import numpy as np
import pytest

from ctxvec import (
    CtxvecError,
    DimensionMismatchError,
    EmbeddingStore,
    FormatError,
    load_binary_embeddings,
    load_embeddings,
    load_text_embeddings,
    save_binary_embeddings,
    save_embeddings,
    save_text_embeddings,
)

from conftest import make_store


class TestStoreInvariants:
    def test_zero_dim_rejected(self):
        with pytest.raises(CtxvecError):
            EmbeddingStore(0)

    def test_duplicate_key_rejected(self):
        store = EmbeddingStore(2)
        store.add("a", [1.0, 2.0])
        with pytest.raises(CtxvecError, match="duplicate"):
            store.add("a", [3.0, 4.0])

    def test_wrong_width_rejected(self):
        store = EmbeddingStore(2)
        with pytest.raises(DimensionMismatchError):
            store.add("a", [1.0, 2.0, 3.0])

    def test_non_finite_rejected(self):
        store = EmbeddingStore(2)
        with pytest.raises(CtxvecError):
            store.add("a", [np.nan, 1.0])

    def test_matrix_insertion_order(self):
        store = make_store([("b", (1, 2)), ("a", (3, 4))])
        assert store.keys() == ["b", "a"]
        assert np.array_equal(store.matrix, [[1, 2], [3, 4]])


class TestTextFormat:
    def test_basic_load(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1.0 2.0\nb 3.0 4.0\n")
        store = load_text_embeddings(path)
        assert store.dim == 2 and len(store) == 2
        assert np.allclose(store.vector("b"), [3.0, 4.0])

    def test_dimension_error_names_line(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1.0\nb 2.0 3.0\n")
        with pytest.raises(FormatError, match="line 2"):
            load_text_embeddings(path)

    def test_empty_file_errors(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("")
        with pytest.raises(FormatError, match="no vectors"):
            load_text_embeddings(path)

    def test_duplicate_key_errors(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 2\na 3 4\n")
        with pytest.raises(FormatError, match="duplicate"):
            load_text_embeddings(path)

    def test_non_finite_errors(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a nan 2\n")
        with pytest.raises(FormatError, match="non-finite"):
            load_text_embeddings(path)

    def test_expected_dim_mismatch(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 2\n")
        with pytest.raises(FormatError):
            load_text_embeddings(path, expected_dim=3)

    def test_roundtrip_within_declared_precision(self, tmp_path):
        rng = np.random.default_rng(0)
        store = EmbeddingStore(5)
        for i in range(20):
            store.add(f"k{i}", rng.standard_normal(5) * 10.0 ** rng.integers(-3, 4))
        path = tmp_path / "v.txt"
        save_text_embeddings(store, path)
        loaded = load_text_embeddings(path)
        assert loaded.keys() == store.keys()
        for key in store.keys():
            np.testing.assert_allclose(loaded.vector(key), store.vector(key), rtol=1e-5)

    def test_space_in_key_rejected(self, tmp_path):
        store = make_store({"bad key": (1.0, 2.0)})
        with pytest.raises(CtxvecError, match="whitespace"):
            save_text_embeddings(store, tmp_path / "v.txt")


class TestBinaryFormat:
    def test_roundtrip_exact_f32(self, tmp_path):
        rng = np.random.default_rng(1)
        store = EmbeddingStore(7)
        for i in range(11):
            store.add(f"k{i}", rng.standard_normal(7).astype(np.float32).astype(np.float64))
        path = tmp_path / "v.bin"
        save_binary_embeddings(store, path)
        loaded = load_binary_embeddings(path)
        assert loaded.keys() == store.keys()
        for key in store.keys():
            assert np.array_equal(loaded.vector(key), store.vector(key))

    def test_magic_sniffing(self, tmp_path):
        store = make_store({"a": (1.0, 2.0)})
        text_path = tmp_path / "v.txt"
        bin_path = tmp_path / "v.bin"
        save_embeddings(store, text_path)
        save_embeddings(store, bin_path)
        assert np.allclose(load_embeddings(text_path).vector("a"), [1, 2])
        assert np.allclose(load_embeddings(bin_path).vector("a"), [1, 2])

    def test_truncated_reports_offset(self, tmp_path):
        store = make_store({"a": (1.0, 2.0), "b": (3.0, 4.0)})
        path = tmp_path / "v.bin"
        save_binary_embeddings(store, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(FormatError, match="truncated at offset"):
            load_binary_embeddings(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "v.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(FormatError, match="magic"):
            load_binary_embeddings(path)

    def test_unicode_keys(self, tmp_path):
        store = make_store({"naïve": (0.5, -0.5)})
        path = tmp_path / "v.bin"
        save_binary_embeddings(store, path)
        assert "naïve" in load_binary_embeddings(path)
