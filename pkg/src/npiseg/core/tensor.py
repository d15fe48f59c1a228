"""Minimal reverse-mode autodiff over numpy arrays.

A Tensor wraps an ndarray plus the closure needed to push gradients back
to its parents. Graphs are built eagerly by the ops below and freed as
soon as the last reference dies; there is no global tape, so disjoint
graphs are safe to build on different threads.

64-bit floats are the default and the only dtype in which gradient
checks are meaningful; float32 is allowed for serving.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor", "backward", "as_tensor", "concat", "stack", "matmul",
    "relu", "softplus", "exp", "log", "sqrt", "take_rows", "narrow",
    "reshape", "transpose", "tsum", "tmean", "tmax",
]

# When True, every vjp output is checked for NaN/Inf during backward.
PARANOID_CHECKS = False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False,
                 _parents: tuple = (), _vjp: Callable | None = None):
        arr = np.asarray(data)
        if arr.dtype.kind in "iub":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._vjp = _vjp if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

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

    def backward(self):
        backward(self)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    t = Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)
    return t


def _coerce_pair(a, b) -> tuple[Tensor, Tensor]:
    """Wrap plain numbers with the dtype of the Tensor operand, so scalar
    constants never promote a float32 graph to float64."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(np.asarray(b, dtype=a.dtype))
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(np.asarray(a, dtype=b.dtype)), b
    return as_tensor(a), as_tensor(b)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- elementwise binary ops ---------------------------------------------

def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    out = Tensor(a.data + b.data, _parents=(a, b),
                 _vjp=lambda g: (_unbroadcast(g, a.data.shape),
                                 _unbroadcast(g, b.data.shape)))
    return out


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    return Tensor(a.data - b.data, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g, a.data.shape),
                                  _unbroadcast(-g, b.data.shape)))


def mul(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    return Tensor(a.data * b.data, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                  _unbroadcast(g * a.data, b.data.shape)))


def div(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    return Tensor(a.data / b.data, _parents=(a, b),
                  _vjp=lambda g: (_unbroadcast(g / b.data, a.data.shape),
                                  _unbroadcast(-g * a.data / (b.data * b.data),
                                               b.data.shape)))


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    out = np.power(a.data, p)
    return Tensor(out, _parents=(a,),
                  _vjp=lambda g: (g * p * np.power(a.data, p - 1.0),))


# -- elementwise unary ops ------------------------------------------------

def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(np.log(a.data), _parents=(a,), _vjp=lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out = np.sqrt(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * 0.5 / out,))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor(np.where(mask, a.data, 0.0), _parents=(a,),
                  _vjp=lambda g: (g * mask,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * (1.0 - out * out),))


def clamp_min(a, floor: float) -> Tensor:
    a = as_tensor(a)
    mask = a.data >= floor
    return Tensor(np.where(mask, a.data, floor), _parents=(a,),
                  _vjp=lambda g: (g * mask,))


def softplus(a) -> Tensor:
    """log(1 + exp(x)), overflow-safe; derivative is the logistic sigmoid."""
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return Tensor(out, _parents=(a,), _vjp=lambda g: (g * sig,))


# -- linear algebra -------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    return Tensor(a.data @ b.data, _parents=(a, b),
                  _vjp=lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.T, _parents=(a,), _vjp=lambda g: (g.T,))


# -- reductions -----------------------------------------------------------

def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return Tensor(out, _parents=(a,), _vjp=vjp)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def tmax(a, axis=None) -> Tensor:
    """Max reduction; the gradient routes to the first argmax per slice."""
    a = as_tensor(a)
    out = a.data.max(axis=axis)

    def vjp(g):
        grad = np.zeros_like(a.data)
        if axis is None:
            idx = np.unravel_index(np.argmax(a.data), a.data.shape)
            grad[idx] = g
        else:
            idx = np.expand_dims(np.argmax(a.data, axis=axis), axis)
            np.put_along_axis(grad, idx, np.expand_dims(g, axis), axis=axis)
        return (grad,)

    return Tensor(out, _parents=(a,), _vjp=vjp)


# -- shape & indexing -------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.reshape(shape), _parents=(a,),
                  _vjp=lambda g: (g.reshape(a.data.shape),))


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out, _parents=tuple(parts), _vjp=vjp)


def stack(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.stack([p.data for p in parts], axis=axis)

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor(out, _parents=tuple(parts), _vjp=vjp)


def take_rows(a, index) -> Tensor:
    """Gather rows (axis 0); backward scatter-adds, so repeats are fine."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.intp)
    out = a.data[index]

    def vjp(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, index, g)
        return (grad,)

    return Tensor(out, _parents=(a,), _vjp=vjp)


def narrow(a, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis."""
    a = as_tensor(a)
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)

    def vjp(g):
        grad = np.zeros_like(a.data)
        grad[sl] = g
        return (grad,)

    return Tensor(a.data[sl], _parents=(a,), _vjp=vjp)


# -- backward pass ----------------------------------------------------------

def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(root: Tensor) -> None:
    """Reverse-mode sweep from a scalar root, accumulating into .grad."""
    if root.data.shape != ():
        raise ValueError(f"backward root must be a scalar, got shape {root.data.shape}")
    if not np.isfinite(root.data):
        raise FloatingPointError("backward root is not finite")
    if not root.requires_grad:
        return
    order = _toposort(root)
    root.grad = np.ones((), dtype=root.data.dtype)
    for node in reversed(order):
        if node._vjp is None or node.grad is None:
            continue
        grads = node._vjp(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            if PARANOID_CHECKS and not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient during backward pass")
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g
