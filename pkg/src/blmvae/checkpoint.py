"""Binary checkpoint files: named float32 tensors plus optimizer state.

Layout (little-endian):

    magic "CKPT" | version u32 = 1
    n_params u32, then per tensor: name (u16 len + utf8), ndim u8,
        dims u32 each, float32 payload
    has_adam u8; if set: lr f64, beta1 f64, beta2 f64, eps f64, step u64,
        n_moments u32, then moment tensors named "m:<param>" / "v:<param>"

A JSON snapshot (config, selection info, training curve) sits alongside at
<path>.json.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import StoreError
from .layers import AdamState
from .training import Checkpoint

MAGIC = b"CKPT"
VERSION = 1


def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    nm = name.encode("utf-8")
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    head = struct.pack("<H", len(nm)) + nm + struct.pack("<B", arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + payload


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw = raw
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.raw):
            raise StoreError(f"{self.path}: truncated checkpoint")
        out = self.raw[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def tensor(self):
        (nlen,) = self.unpack("<H")
        name = self.take(nlen).decode("utf-8")
        (ndim,) = self.unpack("<B")
        shape = self.unpack(f"<{ndim}I")
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(self.take(count * 4), dtype="<f4").reshape(shape).copy()
        return name, data


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    blob = MAGIC + struct.pack("<I", VERSION)
    names = sorted(ckpt.params)
    blob += struct.pack("<I", len(names))
    for name in names:
        blob += _pack_tensor(name, ckpt.params[name])
    adam = ckpt.adam
    if adam is None:
        blob += struct.pack("<B", 0)
    else:
        blob += struct.pack("<B", 1)
        blob += struct.pack("<ddddQ", adam.lr, adam.beta1, adam.beta2, adam.eps, adam.step)
        moments = [("m:" + k, v) for k, v in sorted(adam.m.items())]
        moments += [("v:" + k, v) for k, v in sorted(adam.v.items())]
        blob += struct.pack("<I", len(moments))
        for name, arr in moments:
            blob += _pack_tensor(name, arr)
    path.write_bytes(blob)
    sidecar = {
        "config": ckpt.config,
        "best_epoch": ckpt.best_epoch,
        "best_dev_f1": ckpt.best_dev_f1,
        "curve": ckpt.curve,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise StoreError(f"{path}: bad magic, not a checkpoint")
    rd = _Reader(raw, path)
    rd.take(4)
    (version,) = rd.unpack("<I")
    if version != VERSION:
        raise StoreError(f"{path}: unsupported checkpoint version {version}")
    (n_params,) = rd.unpack("<I")
    params = dict(rd.tensor() for _ in range(n_params))
    (has_adam,) = rd.unpack("<B")
    adam = None
    if has_adam:
        lr, b1, b2, eps, step = rd.unpack("<ddddQ")
        (n_moments,) = rd.unpack("<I")
        adam = AdamState(lr=lr, beta1=b1, beta2=b2, eps=eps, step=int(step))
        for _ in range(n_moments):
            name, arr = rd.tensor()
            kind, key = name.split(":", 1)
            (adam.m if kind == "m" else adam.v)[key] = arr
    side_path = Path(str(path) + ".json")
    if not side_path.exists():
        raise StoreError(f"missing checkpoint sidecar {side_path}")
    side = json.loads(side_path.read_text("utf-8"))
    return Checkpoint(config=side["config"], params=params, adam=adam,
                      best_epoch=side["best_epoch"], best_dev_f1=side["best_dev_f1"],
                      curve=side.get("curve", []))
