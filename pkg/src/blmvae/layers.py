"""Learnable layers (linear, 3D/2D valid convolution) and the Adam optimizer.

Convolutions use cross-correlation semantics with stride 1 and no padding,
so each spatial axis shrinks by kernel-1.  Forward passes im2col into one
matmul; backward reuses the cached column matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autodiff import Tensor
from .errors import NumericError, ShapeError


@dataclass
class LayerParams:
    kind: str  # linear | conv3d | conv2d
    weights: Tensor
    bias: Tensor
    meta: dict = field(default_factory=dict)

    def tensors(self) -> list[Tensor]:
        return [self.weights, self.bias]


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _bias_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def linear_init(in_dim: int, out_dim: int, rng, name: str, dtype=np.float32) -> LayerParams:
    w = Tensor(_kaiming_uniform(rng, (in_dim, out_dim), in_dim, dtype),
               requires_grad=True, name=f"{name}.w")
    b = Tensor(_bias_uniform(rng, (out_dim,), in_dim, dtype),
               requires_grad=True, name=f"{name}.b")
    return LayerParams("linear", w, b, {"in": in_dim, "out": out_dim})


def conv_init(kind: str, in_ch: int, out_ch: int, kernel: tuple, rng, name: str,
              dtype=np.float32) -> LayerParams:
    fan_in = in_ch * int(np.prod(kernel))
    w = Tensor(_kaiming_uniform(rng, (out_ch, in_ch) + tuple(kernel), fan_in, dtype),
               requires_grad=True, name=f"{name}.w")
    b = Tensor(_bias_uniform(rng, (out_ch,), fan_in, dtype),
               requires_grad=True, name=f"{name}.b")
    return LayerParams(kind, w, b, {"in_ch": in_ch, "out_ch": out_ch, "kernel": tuple(kernel)})


def linear_forward(x: Tensor, p: LayerParams) -> Tensor:
    """out = x @ W + b for x of shape (B, in)."""
    if p.kind != "linear":
        raise ShapeError(f"expected linear params, got {p.kind}")
    if x.data.ndim != 2 or x.data.shape[1] != p.weights.data.shape[0]:
        raise ShapeError(
            f"linear input {x.data.shape} incompatible with weights {p.weights.data.shape}")
    return x @ p.weights + p.bias


# ---------------------------------------------------------------------------
# Valid cross-correlation for any number of spatial dims

_COL2IM_INDEX_CACHE: dict = {}


def _col2im_indices(in_ch: int, spatial: tuple, kernel: tuple) -> np.ndarray:
    """Flat per-image input index for each (output position, column element)."""
    key = (in_ch, spatial, kernel)
    cached = _COL2IM_INDEX_CACHE.get(key)
    if cached is not None:
        return cached
    out_sp = tuple(s - k + 1 for s, k in zip(spatial, kernel))
    nd = len(spatial)
    pos = np.indices(out_sp).reshape(nd, -1).T          # (P, nd)
    off = np.indices(kernel).reshape(nd, -1).T          # (Kk, nd)
    grid = pos[:, None, :] + off[None, :, :]            # (P, Kk, nd)
    flat_sp = np.ravel_multi_index(tuple(grid[..., d] for d in range(nd)), spatial)
    sp_size = int(np.prod(spatial))
    idx = np.arange(in_ch)[None, :, None] * sp_size + flat_sp[:, None, :]
    idx = np.ascontiguousarray(idx.reshape(len(pos), -1))  # (P, Cin*Kk)
    _COL2IM_INDEX_CACHE[key] = idx
    return idx


def _conv_forward(x: Tensor, p: LayerParams, nd: int) -> Tensor:
    xd, wd, bd = x.data, p.weights.data, p.bias.data
    if xd.ndim != nd + 2 or wd.ndim != nd + 2:
        raise ShapeError(
            f"conv{nd}d expects {nd + 2}D input/kernel, got {xd.shape} / {wd.shape}")
    batch, in_ch = xd.shape[:2]
    spatial = xd.shape[2:]
    out_ch = wd.shape[0]
    kernel = wd.shape[2:]
    if wd.shape[1] != in_ch:
        raise ShapeError(f"kernel channels {wd.shape[1]} != input channels {in_ch}")
    out_sp = tuple(s - k + 1 for s, k in zip(spatial, kernel))
    if any(o < 1 for o in out_sp):
        raise ShapeError(f"kernel {kernel} larger than input {spatial}")

    win = sliding_window_view(xd, kernel, axis=tuple(range(2, 2 + nd)))
    # (B, Cin, *out_sp, *kernel) -> (B, *out_sp, Cin, *kernel) -> columns
    perm = (0,) + tuple(range(2, 2 + nd)) + (1,) + tuple(range(2 + nd, 2 + 2 * nd))
    positions = int(np.prod(out_sp))
    k_elems = in_ch * int(np.prod(kernel))
    cols = np.ascontiguousarray(win.transpose(perm)).reshape(batch * positions, k_elems)
    wmat = wd.reshape(out_ch, k_elems)

    out = cols @ wmat.T + bd
    out = np.moveaxis(out.reshape((batch,) + out_sp + (out_ch,)), -1, 1)
    out = np.ascontiguousarray(out)

    def backward(grad):
        g = np.moveaxis(grad, 1, -1).reshape(batch * positions, out_ch)
        gw = gb = gx = None
        if p.weights.requires_grad:
            gw = (g.T @ cols).reshape(wd.shape)
        if p.bias.requires_grad:
            gb = g.sum(axis=0)
        if x.requires_grad:
            contrib = g @ wmat                           # (B*P, Cin*Kk)
            idx = _col2im_indices(in_ch, spatial, kernel)
            flat_idx = idx.reshape(-1)
            img = in_ch * int(np.prod(spatial))
            contrib = contrib.reshape(batch, -1)
            gx = np.empty((batch, img), dtype=xd.dtype)
            for bi in range(batch):
                gx[bi] = np.bincount(flat_idx, weights=contrib[bi], minlength=img)
            gx = gx.reshape(xd.shape)
        return (gx, gw, gb)

    return Tensor(out, parents=(x, p.weights, p.bias), backward_fn=backward)


def conv3d_forward(x: Tensor, p: LayerParams) -> Tensor:
    """(B, Cin, S, N, M) -> (B, Cout, S-kd+1, N-kh+1, M-kw+1)."""
    if p.kind != "conv3d":
        raise ShapeError(f"expected conv3d params, got {p.kind}")
    return _conv_forward(x, p, 3)


def conv2d_forward(x: Tensor, p: LayerParams) -> Tensor:
    """(B, Cin, H, W) -> (B, Cout, H-kh+1, W-kw+1)."""
    if p.kind != "conv2d":
        raise ShapeError(f"expected conv2d params, got {p.kind}")
    return _conv_forward(x, p, 2)


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def param_tensors(params: list[LayerParams]) -> list[Tensor]:
    out = []
    for p in params:
        out.extend(p.tensors())
    return out


def adam_step(params: list[LayerParams], grads, state: AdamState) -> None:
    """Bias-corrected Adam update applied in place.

    grads aligns with param_tensors(params); pass None to read each
    tensor's accumulated .grad instead.  A non-finite gradient rejects the
    whole update, naming the offending parameter.
    """
    tensors = param_tensors(params)
    if grads is None:
        grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    if len(grads) != len(tensors):
        raise ShapeError(f"got {len(grads)} gradients for {len(tensors)} parameters")
    for t, g in zip(tensors, grads):
        if g.shape != t.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {t.data.shape}"
                             f" for {t.name}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {t.name}")

    state.step += 1
    t_step = state.step
    for tensor, g in zip(tensors, grads):
        key = tensor.name
        if key is None:
            raise ShapeError("Adam requires named parameter tensors")
        if key not in state.m:
            state.m[key] = np.zeros_like(tensor.data)
            state.v[key] = np.zeros_like(tensor.data)
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1 ** t_step)
        v_hat = v / (1.0 - state.beta2 ** t_step)
        tensor.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(
            tensor.data.dtype, copy=False)
