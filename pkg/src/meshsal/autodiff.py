"""Reverse-mode automatic differentiation over numpy float64 arrays.

A Tensor wraps an ndarray and records the operation that produced it; calling
``backward()`` on a scalar loss walks the graph in reverse topological order
and accumulates gradients into every tensor created with ``requires_grad``.
The graph is rebuilt on every forward pass (define-by-run), which keeps the
engine small and the control flow in plain Python.

Non-differentiable points use fixed subgradients: ``relu``/clamp pass zero
gradient exactly at the boundary, ``abs`` uses sign(0) = 0, and ``max``
reductions route the gradient to the first maximal element.

Two pieces of ambient state are managed with context managers:

* :func:`no_grad` disables graph recording (inference paths).
* :func:`count_flops` tallies floating point work of every executed op, used
  by the FLOP report: one multiply-add counts as two.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_ENABLED = True
_FLOP_COUNTERS: list["FlopCounter"] = []


class FlopCounter:
    """Accumulates an estimate of executed floating point operations."""

    def __init__(self) -> None:
        self.flops = 0.0

    def add(self, n: float) -> None:
        self.flops += n


@contextmanager
def count_flops():
    counter = FlopCounter()
    _FLOP_COUNTERS.append(counter)
    try:
        yield counter
    finally:
        _FLOP_COUNTERS.remove(counter)


def _bump(n: float) -> None:
    for c in _FLOP_COUNTERS:
        c.add(n)


@contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, size in enumerate(shape):
        if size == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    """An ndarray plus the backward rule of the op that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None  # callable(out_grad) -> tuple of parent grads

    # -- construction ----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph -------------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every requiring leaf tensor."""
        if grad is None:
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.asarray(grad, dtype=np.float64) if self.grad is None else self.grad + grad
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += g

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -np.asarray(other))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, key):
        return take(self, key)

    # method aliases used throughout the model code
    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None):
        return tmax(self, axis=axis)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    @property
    def T(self):
        return transpose(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, rng: np.random.Generator | None = None, scale: float | None = None) -> Tensor:
    """A leaf tensor tracked by the optimizer.

    With ``rng`` given, ``data`` is interpreted as a shape and the tensor is
    normal-initialized with std ``scale`` (default 1/sqrt(fan_in)).
    """
    if rng is not None:
        shape = tuple(data)
        fan_in = shape[0] if shape else 1
        std = scale if scale is not None else 1.0 / np.sqrt(max(1, fan_in))
        data = rng.normal(0.0, std, size=shape)
    return Tensor(data, requires_grad=True)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], vjp, flops: float) -> Tensor:
    _bump(flops)
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


# -- arithmetic ---------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(data, (a, b), vjp, data.size)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(data, (a, b), vjp, data.size)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def vjp(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _make(data, (a, b), vjp, 2 * data.size)


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    data = a.data**p

    def vjp(g):
        return (g * p * a.data ** (p - 1),)

    return _make(data, (a,), vjp, 2 * data.size)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data @ b.data
    m = a.data.shape[0] if a.ndim == 2 else 1
    k = a.data.shape[-1]
    n = b.data.shape[-1] if b.ndim == 2 else 1

    def vjp(g):
        if a.ndim == 1 and b.ndim == 2:  # (k,) @ (k,n) -> (n,)
            return g @ b.data.T, np.outer(a.data, g)
        if a.ndim == 2 and b.ndim == 1:  # (m,k) @ (k,) -> (m,)
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _make(data, (a, b), vjp, 2.0 * m * k * n)


# -- elementwise nonlinearities -----------------------------------------------


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def vjp(g):
        return (g * data,)

    return _make(data, (a,), vjp, data.size)


def log(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def vjp(g):
        return (g / a.data,)

    return _make(data, (a,), vjp, data.size)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    data = np.sqrt(a.data)

    def vjp(g):
        return (g * 0.5 / data,)

    return _make(data, (a,), vjp, data.size)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - data * data),)

    return _make(data, (a,), vjp, data.size)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    data = 1.0 / (1.0 + np.exp(-np.clip(a.data, -60.0, 60.0)))

    def vjp(g):
        return (g * data * (1.0 - data),)

    return _make(data, (a,), vjp, data.size)


def softplus(a) -> Tensor:
    """log(1 + exp(x)), computed stably; gradient is the logistic sigmoid."""
    a = as_tensor(a)
    data = np.logaddexp(0.0, a.data)

    def vjp(g):
        return (g / (1.0 + np.exp(-np.clip(a.data, -60.0, 60.0))),)

    return _make(data, (a,), vjp, 2 * data.size)


def relu(a) -> Tensor:
    """max(x, 0); the subgradient at exactly 0 is 0."""
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def vjp(g):
        return (g * (a.data > 0.0),)

    return _make(data, (a,), vjp, data.size)


def absolute(a) -> Tensor:
    """|x| with subgradient sign(x) (0 at the kink)."""
    a = as_tensor(a)
    data = np.abs(a.data)

    def vjp(g):
        return (g * np.sign(a.data),)

    return _make(data, (a,), vjp, data.size)


# -- reductions ---------------------------------------------------------------


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _make(data, (a,), vjp, a.size)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.size / data.size

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.shape).copy(),)

    return _make(data, (a,), vjp, a.size)


def tmax(a, axis=None) -> Tensor:
    """Max reduction; ties route the gradient to the first maximal element."""
    a = as_tensor(a)
    if axis is None:
        data = a.data.max()
        flat_idx = int(np.argmax(a.data))

        def vjp(g):
            out = np.zeros_like(a.data)
            out.flat[flat_idx] = g
            return (out,)

        return _make(data, (a,), vjp, a.size)

    data = a.data.max(axis=axis)
    idx = np.expand_dims(np.argmax(a.data, axis=axis), axis)

    def vjp(g):
        out = np.zeros_like(a.data)
        np.put_along_axis(out, idx, np.expand_dims(g, axis), axis=axis)
        return (out,)

    return _make(data, (a,), vjp, a.size)


def softmax(a, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis``."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return _make(data, (a,), vjp, 4 * a.size)


# -- shape & indexing -----------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.shape),)

    return _make(data, (a,), vjp, 0)


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    data = a.data.transpose(axes)

    def vjp(g):
        inv = None if axes is None else np.argsort(axes)
        return (g.transpose(inv),)

    return _make(data, (a,), vjp, 0)


def concatenate(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(data, tuple(tensors), vjp, 0)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def vjp(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _make(data, tuple(tensors), vjp, 0)


def take(a, key) -> Tensor:
    """Indexing/gather; the backward pass scatter-adds into the source shape.

    Supports anything ``np.add.at`` accepts: ints, slices, integer arrays and
    tuples thereof.  Integer-array gathers are the workhorse of subgraph
    pooling and interpolation.
    """
    a = as_tensor(a)
    data = a.data[key]

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, key, g)
        return (out,)

    return _make(data, (a,), vjp, 0)


