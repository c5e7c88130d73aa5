"""Embedding store persistence, reshaping, and instance assembly."""

import numpy as np
import pytest

from blmvae.data import SynthConfig, synth_generate
from blmvae.errors import ShapeError, StoreError
from blmvae.store import (EmbeddingStore, Shape2D, assemble_instance,
                          read_store, reshape_2d, write_store)


class TestReshape2D:
    def test_row_major_positions(self):
        v = np.arange(768, dtype=np.float32)
        m = reshape_2d(v, Shape2D(32, 24))
        assert m[1, 0] == 24
        assert m[31, 23] == 767
        assert m[0, 0] == 0

    def test_roundtrip_bit_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            v = rng.standard_normal(768).astype(np.float32)
            m = reshape_2d(v, Shape2D(32, 24))
            np.testing.assert_array_equal(m.reshape(-1), v)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError, match="767"):
            reshape_2d(np.zeros(767, dtype=np.float32), Shape2D(32, 24))


class TestStoreRoundtrip:
    def test_empty_store(self, tmp_path):
        store = EmbeddingStore(dim=768)
        path = tmp_path / "empty.emb"
        write_store(store, path)
        back = read_store(path)
        assert back.count == 0
        assert back.dim == 768
        assert back.index == {}

    def test_vectors_bit_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        vecs = {f"s{i}": rng.standard_normal(64).astype(np.float32) for i in range(3)}
        store = EmbeddingStore.from_dict(vecs, 64)
        path = tmp_path / "v.emb"
        write_store(store, path)
        back = read_store(path)
        assert back.index == store.index
        np.testing.assert_array_equal(back.vectors, store.vectors)
        assert back.vectors.tobytes() == store.vectors.tobytes()

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(2)
        store = EmbeddingStore.from_dict(
            {"a": rng.standard_normal(8).astype(np.float32),
             "b": rng.standard_normal(8).astype(np.float32)}, 8)
        path = tmp_path / "t.emb"
        write_store(store, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:20 + 8 * 4])  # header + one vector only
        with pytest.raises(StoreError, match="payload length"):
            read_store(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.emb"
        path.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(StoreError, match="magic"):
            read_store(path)

    def test_sidecar_location(self, tmp_path):
        store = EmbeddingStore(dim=4)
        write_store(store, tmp_path / "foo.emb")
        assert (tmp_path / "foo.idx.json").exists()

    def test_nonfinite_rejected(self, tmp_path):
        store = EmbeddingStore.from_dict({"a": np.full(4, np.nan, dtype=np.float32)}, 4)
        with pytest.raises(StoreError, match="non-finite"):
            write_store(store, tmp_path / "nan.emb")

    def test_index_bijection_enforced(self, tmp_path):
        store = EmbeddingStore(dim=4, vectors=np.zeros((2, 4), dtype=np.float32),
                               index={"a": 0, "b": 2})
        with pytest.raises(StoreError, match="bijection"):
            write_store(store, tmp_path / "bij.emb")


class TestAssembleInstance:
    def test_zero_context(self):
        instances, store = synth_generate(SynthConfig(count=1, dim=768, noise=0.0), seed=0)
        inst = instances[0]
        zeroed = EmbeddingStore(
            dim=768, vectors=np.zeros_like(store.vectors), index=dict(store.index))
        tensors = assemble_instance(inst, zeroed, Shape2D(32, 24))
        assert tensors.context_stack.shape == (7, 32, 24)
        assert not tensors.context_stack.any()

    def test_slices_match_generator_vectors(self):
        instances, store = synth_generate(SynthConfig(count=3, dim=768), seed=5)
        inst = instances[1]
        tensors = assemble_instance(inst, store, Shape2D(32, 24))
        for i, s in enumerate(inst.context):
            np.testing.assert_array_equal(tensors.context_stack[i].reshape(-1),
                                          store.vector(s.id))
        assert tensors.correct_index == inst.correct_index
        assert [lab for _, lab in tensors.answer_embeddings] \
            == [lab for _, lab in inst.answers]

    def test_unknown_id(self):
        instances, store = synth_generate(SynthConfig(count=1, dim=768), seed=0)
        inst = instances[0]
        inst.context[3].id = "x9"
        with pytest.raises(KeyError, match="x9"):
            assemble_instance(inst, store, Shape2D(32, 24))
