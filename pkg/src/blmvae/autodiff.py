"""Minimal reverse-mode automatic differentiation over numpy arrays.

Only the operations this package's models need are implemented: elementwise
arithmetic, matmul, reshape/slice/concat, reductions, relu/exp/log/sqrt,
and softmax.  Convolutions live in layers.py but plug into the same tape.

Training runs in float32; gradient checking builds float64 graphs.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError


class Tensor:
    """A numpy array plus the tape bookkeeping for reverse-mode gradients.

    backward_fn receives the output gradient and returns one gradient per
    parent (None for parents that need no gradient).
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None, name=None):
        self.data = np.asarray(data)
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self.grad = None
        self.name = name
        self._parents = parents
        self._backward_fn = backward_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction ------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable .grad."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.data.shape}")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is None or node.grad is None:
                continue
            grads = node._backward_fn(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, -_ensure(other))

    def __rsub__(self, other):
        return add(_ensure(other), -self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_ensure(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __getitem__(self, key):
        return take(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def _topo_order(root: Tensor) -> list:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _ensure(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# Elementwise and linear-algebra ops


def add(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out = a.data + b.data
    return Tensor(out, parents=(a, b), backward_fn=lambda g: (
        _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def mul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out = a.data * b.data
    return Tensor(out, parents=(a, b), backward_fn=lambda g: (
        _unbroadcast(g * b.data, a.data.shape),
        _unbroadcast(g * a.data, b.data.shape)))


def div(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out = a.data / b.data
    return Tensor(out, parents=(a, b), backward_fn=lambda g: (
        _unbroadcast(g / b.data, a.data.shape),
        _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))


def matmul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data
    return Tensor(out, parents=(a, b), backward_fn=lambda g: (
        g @ b.data.T, a.data.T @ g))


def power(a, exponent: float) -> Tensor:
    a = _ensure(a)
    out = a.data ** exponent
    return Tensor(out, parents=(a,), backward_fn=lambda g: (
        g * exponent * a.data ** (exponent - 1),))


def exp(a) -> Tensor:
    a = _ensure(a)
    out = np.exp(a.data)
    return Tensor(out, parents=(a,), backward_fn=lambda g: (g * out,))


def log(a) -> Tensor:
    a = _ensure(a)
    return Tensor(np.log(a.data), parents=(a,), backward_fn=lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = _ensure(a)
    out = np.sqrt(a.data)
    return Tensor(out, parents=(a,), backward_fn=lambda g: (g * 0.5 / out,))


def relu(a) -> Tensor:
    a = _ensure(a)
    mask = a.data > 0
    # np.maximum (not where) so NaN propagates instead of masking to 0
    return Tensor(np.maximum(a.data, 0), parents=(a,),
                  backward_fn=lambda g: (g * mask,))


def softmax(a, axis: int = -1) -> Tensor:
    a = _ensure(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return Tensor(out, parents=(a,), backward_fn=backward)


# ---------------------------------------------------------------------------
# Shape ops and reductions


def reshape(a, shape) -> Tensor:
    a = _ensure(a)
    out = a.data.reshape(shape)
    return Tensor(out, parents=(a,), backward_fn=lambda g: (g.reshape(a.data.shape),))


def take(a, key) -> Tensor:
    """Basic (slice/integer) indexing; repeated fancy indices are unsupported."""
    a = _ensure(a)
    out = a.data[key]

    def backward(g):
        buf = np.zeros_like(a.data)
        buf[key] += g
        return (buf,)

    return Tensor(out, parents=(a,), backward_fn=backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_ensure(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        slicer = [slice(None)] * g.ndim
        grads = []
        for i in range(len(tensors)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(slicer)])
        return tuple(grads)

    return Tensor(out, parents=tuple(tensors), backward_fn=backward)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _ensure(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return Tensor(out, parents=(a,), backward_fn=backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _ensure(a)
    n = a.data.size if axis is None else np.prod(
        [a.data.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


# ---------------------------------------------------------------------------
# Finite-difference gradient oracle


def grad_check(f, point: Tensor, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    f must map a Tensor to a scalar Tensor.  The check perturbs every
    coordinate of `point`, so use float64 data and keep points modest in
    size.  Returns max_k |analytic_k - central_k| / max(1e-12, |central_k|).
    """
    x0 = np.array(point.data, dtype=np.float64)

    probe = Tensor(x0.copy(), requires_grad=True)
    out = f(probe)
    if not np.isfinite(out.data).all():
        raise NumericError("function value is non-finite at the check point")
    out.backward()
    analytic = (probe.grad if probe.grad is not None else np.zeros_like(x0)).reshape(-1)

    flat = x0.reshape(-1)
    wrapped = Tensor(x0)  # shares the buffer; f re-reads it on every call
    central = np.empty_like(flat)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = float(f(wrapped).data)
        flat[k] = orig - h
        fm = float(f(wrapped).data)
        flat[k] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value while perturbing coordinate {k}")
        central[k] = (fp - fm) / (2.0 * h)

    rel = np.abs(analytic - central) / np.maximum(1e-12, np.abs(central))
    return float(rel.max())
