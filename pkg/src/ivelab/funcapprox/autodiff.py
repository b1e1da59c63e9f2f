"""A small graph-based reverse-mode differentiation engine over numpy arrays.

Every ``Tensor`` produced by an operation remembers its parents and a closure
that maps the output gradient to parent gradients. ``backward`` walks the graph
in reverse topological order from a scalar root.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward", "op")

    def __init__(self, value, parents=(), backward=None, op="leaf"):
        self.value = np.asarray(value, dtype=float)
        # None until backward reaches this node; read it through ``gradient``
        self.grad = None
        self._parents = parents
        self._backward = backward
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def gradient(self) -> np.ndarray:
        return np.zeros_like(self.value) if self.grad is None else self.grad

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_lift(other), -1.0))

    def __rsub__(self, other):
        return add(_lift(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, op="const")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor(a.value + b.value, (a, b), backward, "add")


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def backward(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return Tensor(a.value * b.value, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)

    def backward(g):
        return g @ b.value.T, a.value.T @ g

    return Tensor(a.value @ b.value, (a, b), backward, "matmul")


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)
    return Tensor(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.value))
    return Tensor(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    x = a.value
    neg = alpha * np.expm1(np.minimum(x, 0.0))
    out = np.where(x > 0, x, neg)
    slope = np.where(x > 0, 1.0, neg + alpha)
    return Tensor(out, (a,), lambda g: (g * slope,), "elu")


def square(a: Tensor) -> Tensor:
    return Tensor(a.value * a.value, (a,), lambda g: (2.0 * g * a.value,), "square")


def total(a: Tensor) -> Tensor:
    """Sum of all entries as a 0-d tensor."""
    return Tensor(a.value.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),), "sum")


def columns(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice ``a[:, start:stop]``."""

    def backward(g):
        full = np.zeros_like(a.value)
        full[:, start:stop] = g
        return (full,)

    return Tensor(a.value[:, start:stop], (a,), backward, "columns")


def _topological_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(node) into ``node.grad`` for every ancestor."""
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    order = _topological_order(root)
    for node in order:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._backward(node.grad)):
            if parent.op == "const":
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
