"""Embedding storage, 1D->2D reshaping, and instance tensor assembly.

Sentence vectors are float32 rows keyed by sentence id.  The on-disk format
is a little-endian binary file:

    magic "EMB1" | version u32 = 1 | count u64 | dim u32 | count*dim float32

with a JSON sidecar mapping sentence id -> row index, stored next to the
store under the same basename with extension ``.idx.json``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeError, StoreError

MAGIC = b"EMB1"
VERSION = 1


@dataclass
class Shape2D:
    """Target 2D shape for a sentence embedding; rows*cols must equal dim."""

    rows: int = 32
    cols: int = 24

    @property
    def dim(self) -> int:
        return self.rows * self.cols


@dataclass
class EmbeddingStore:
    """In-memory table of float32 sentence vectors with an id -> row index."""

    dim: int
    vectors: np.ndarray = field(default=None)  # (count, dim) float32
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.vectors is None:
            self.vectors = np.zeros((0, self.dim), dtype=np.float32)
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise ShapeError(
                f"vectors shape {self.vectors.shape} incompatible with dim {self.dim}"
            )

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    def validate(self) -> None:
        """Check the store invariants: finite entries, bijective index."""
        if not np.isfinite(self.vectors).all():
            raise StoreError("store contains non-finite entries")
        rows = sorted(self.index.values())
        if rows != list(range(self.count)):
            raise StoreError("index is not a bijection onto rows")

    def vector(self, sentence_id: str) -> np.ndarray:
        try:
            return self.vectors[self.index[sentence_id]]
        except KeyError:
            raise KeyError(f"sentence id {sentence_id!r} not in store") from None

    @classmethod
    def from_dict(cls, vectors: dict[str, np.ndarray], dim: int) -> "EmbeddingStore":
        """Build a store from {id: vector}, rows in insertion order."""
        ids = list(vectors)
        mat = np.zeros((len(ids), dim), dtype=np.float32)
        for row, sid in enumerate(ids):
            v = np.asarray(vectors[sid], dtype=np.float32)
            if v.shape != (dim,):
                raise ShapeError(f"vector for {sid!r} has shape {v.shape}, want ({dim},)")
            mat[row] = v
        return cls(dim=dim, vectors=mat, index={sid: row for row, sid in enumerate(ids)})


def reshape_2d(v: np.ndarray, shape: Shape2D) -> np.ndarray:
    """Row-major reshape of a dim-length vector to (rows, cols).

    Element k lands at (k // cols, k % cols); flattening the result gives
    back the input bit-exactly.
    """
    v = np.asarray(v)
    if v.ndim != 1 or v.size != shape.dim:
        raise ShapeError(f"vector length {v.size} != {shape.rows}x{shape.cols}")
    return v.reshape(shape.rows, shape.cols)


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".idx.json")


def write_store(store: EmbeddingStore, path) -> None:
    """Write the binary store and its id sidecar."""
    store.validate()
    path = Path(path)
    header = MAGIC + struct.pack("<IQI", VERSION, store.count, store.dim)
    payload = np.ascontiguousarray(store.vectors, dtype="<f4").tobytes()
    path.write_bytes(header + payload)
    by_row = sorted(store.index.items(), key=lambda kv: kv[1])
    sidecar_path(path).write_text(
        json.dumps({sid: row for sid, row in by_row}, ensure_ascii=False, indent=0),
        encoding="utf-8",
    )


def read_store(path) -> EmbeddingStore:
    """Read a store written by write_store; bit-exact float32 roundtrip."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 20 or raw[:4] != MAGIC:
        raise StoreError(f"{path}: bad magic, not an embedding store")
    version, count, dim = struct.unpack("<IQI", raw[4:20])
    if version != VERSION:
        raise StoreError(f"{path}: unsupported store version {version}")
    payload = raw[20:]
    expected = count * dim * 4
    if len(payload) != expected:
        raise StoreError(
            f"{path}: payload length {len(payload)} != count*dim*4 = {expected}"
        )
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim).copy()
    idx_path = sidecar_path(path)
    if not idx_path.exists():
        raise StoreError(f"missing index sidecar {idx_path}")
    index = {str(k): int(v) for k, v in json.loads(idx_path.read_text("utf-8")).items()}
    if len(index) != count:
        raise StoreError(f"{idx_path}: index has {len(index)} ids, store has {count} rows")
    return EmbeddingStore(dim=dim, vectors=vectors, index=index)


@dataclass
class InstanceTensors:
    """One problem instance resolved to arrays ready for a model.

    context_stack is (S, rows, cols); slice i is the row-major 2D view of
    context sentence i.  answer_embeddings keeps the dataset's answer order.
    """

    context_stack: np.ndarray
    answer_embeddings: list  # [(2D array, label)]
    correct_index: int


def assemble_instance(instance, store: EmbeddingStore, shape: Shape2D) -> InstanceTensors:
    """Resolve an instance's sentences against the store and 2D-reshape them."""

    def lookup(sid):
        if sid not in store.index:
            raise KeyError(f"sentence id {sid!r} not in store")
        return store.vectors[store.index[sid]]

    stack = np.stack([reshape_2d(lookup(s.id), shape) for s in instance.context])
    answers = [(reshape_2d(lookup(s.id), shape), label) for s, label in instance.answers]
    return InstanceTensors(
        context_stack=stack,
        answer_embeddings=answers,
        correct_index=instance.correct_index,
    )
