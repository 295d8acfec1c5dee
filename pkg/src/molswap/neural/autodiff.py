"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray and remembers how to push gradients to its
parents. Calling backward() on a scalar output accumulates gradients into
every tensor that contributed to it. Dtype follows the inputs, so the same
graph runs in float32 for training and float64 for gradient checking.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcasted gradient back to the parent's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def backward(g):
        a.accumulate(_unbroadcast(g, a.data.shape))
        b.accumulate(_unbroadcast(-g, b.data.shape))

    return Tensor(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def backward(g):
        a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data @ b.data

    def backward(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 2:  # (k,) @ (k,m) -> (m,)
            a.accumulate(g @ bd.T)
            b.accumulate(np.outer(ad, g))
        elif ad.ndim == 2 and bd.ndim == 1:  # (n,k) @ (k,) -> (n,)
            a.accumulate(np.outer(g, bd))
            b.accumulate(ad.T @ g)
        elif ad.ndim == 1 and bd.ndim == 1:  # dot product
            a.accumulate(g * bd)
            b.accumulate(g * ad)
        else:  # (n,k) @ (k,m)
            a.accumulate(g @ bd.T)
            b.accumulate(ad.T @ g)

    return Tensor(out_data, (a, b), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    out_data = a.data * mask

    def backward(g):
        a.accumulate(g * mask)

    return Tensor(out_data, (a,), backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def backward(g):
        a.accumulate(g * out_data * (1.0 - out_data))

    return Tensor(out_data, (a,), backward)


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    out_data = np.abs(a.data)

    def backward(g):
        a.accumulate(g * sign)

    return Tensor(out_data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.log(a.data)

    def backward(g):
        a.accumulate(g / a.data)

    return Tensor(out_data, (a,), backward)


def clip(a, lo: float, hi: float) -> Tensor:
    """Gradient passes only where the value is strictly inside the range."""
    a = as_tensor(a)
    out_data = np.clip(a.data, lo, hi)
    mask = (a.data > lo) & (a.data < hi)

    def backward(g):
        a.accumulate(g * mask)

    return Tensor(out_data, (a,), backward)


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            a.accumulate(np.full_like(a.data, 1.0) * g)
        else:
            a.accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return Tensor(out_data, (a,), backward)


def tmean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis), 1.0 / count)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            p.accumulate(g[tuple(idx)])

    return Tensor(out_data, tuple(parts), backward)


def gather(a, idx) -> Tensor:
    """Rows of a along axis 0 at integer indices (repeats allowed)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=int)
    out_data = a.data[idx]

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        a.accumulate(acc)

    return Tensor(out_data, (a,), backward)


def segment_sum(a, idx, n: int) -> Tensor:
    """out[s] = sum of rows of a where idx == s, for s in range(n)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=int)
    out_data = np.zeros((n,) + a.data.shape[1:], dtype=a.data.dtype)
    np.add.at(out_data, idx, a.data)

    def backward(g):
        a.accumulate(g[idx])

    return Tensor(out_data, (a,), backward)


def expand_rows(a, count: int) -> Tensor:
    """Tile a vector into (count, len(a)) rows."""
    a = as_tensor(a)
    out_data = np.broadcast_to(a.data, (count,) + a.data.shape).copy()

    def backward(g):
        a.accumulate(g.sum(axis=0))

    return Tensor(out_data, (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)

    def backward(g):
        a.accumulate(g.reshape(a.data.shape))

    return Tensor(out_data, (a,), backward)
