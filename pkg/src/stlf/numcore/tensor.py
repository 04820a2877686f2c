"""Dense float64 tensors with tape-based reverse-mode differentiation.

Every differentiable operation records a :class:`Node` holding its inputs,
outputs and a backward closure. ``Tensor.backward`` walks the nodes in
reverse topological order. Operations may produce several outputs (the
recurrent scan returns hidden states and the final cell state), which is why
the tape is node-based rather than tensor-based.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


class ContractError(ValueError):
    """Raised when operands violate a shape or domain contract."""


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Node:
    __slots__ = ("inputs", "outputs", "backward_fn")

    def __init__(self, inputs, outputs, backward_fn):
        self.inputs = inputs
        self.outputs = outputs
        self.backward_fn = backward_fn


class Tensor:
    """A float64 array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "node", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node: Node | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf's ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError("backward() without a seed needs a scalar tensor")
            grad = np.ones_like(self.data)
        order = _topo_nodes(self)
        self.grad = np.asarray(grad, dtype=np.float64).reshape(self.shape)
        for node in reversed(order):
            out_grads = [
                o.grad if o.grad is not None else np.zeros_like(o.data) for o in node.outputs
            ]
            in_grads = node.backward_fn(out_grads)
            for t, g in zip(node.inputs, in_grads):
                if g is None or not t.requires_grad:
                    continue
                if t.grad is None:
                    t.grad = np.array(g, dtype=np.float64, copy=True)
                else:
                    t.grad = t.grad + g
            # intermediate buffers are no longer needed once propagated
            for o in node.outputs:
                if o is not self:
                    o.grad = None

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)


def _topo_nodes(root: Tensor) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    if root.node is None:
        return order
    stack = [(root.node, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for t in node.inputs:
            if t.node is not None and id(t.node) not in seen:
                stack.append((t.node, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(inputs: Sequence[Tensor], outputs: Sequence[np.ndarray], backward_fn: Callable):
    """Wrap raw outputs as tensors and attach a node when any input is tracked."""
    track = _GRAD_ENABLED and any(t.requires_grad for t in inputs)
    outs = [Tensor(o, requires_grad=track) for o in outputs]
    if track:
        node = Node(tuple(inputs), outs, backward_fn)
        for o in outs:
            o.node = node
    return outs


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- element-wise ---------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g[0], a.shape), _unbroadcast(g[0], b.shape)

    return _record((a, b), [a.data + b.data], bw)[0]


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g[0], a.shape), _unbroadcast(-g[0], b.shape)

    return _record((a, b), [a.data - b.data], bw)[0]


def mul(a, b) -> Tensor:
    """Element-wise product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g[0] * b.data, a.shape), _unbroadcast(g[0] * a.data, b.shape)

    return _record((a, b), [a.data * b.data], bw)[0]


def square(a) -> Tensor:
    a = as_tensor(a)
    return _record((a,), [a.data * a.data], lambda g: (2.0 * a.data * g[0],))[0]


def absolute(a) -> Tensor:
    a = as_tensor(a)
    return _record((a,), [np.abs(a.data)], lambda g: (np.sign(a.data) * g[0],))[0]


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _record((a,), [y], lambda g: (g[0] * (1.0 - y * y),))[0]


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = _sigmoid(a.data)
    return _record((a,), [y], lambda g: (g[0] * y * (1.0 - y),))[0]


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _record((a,), [np.where(mask, a.data, 0.0)], lambda g: (g[0] * mask,))[0]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# -- reductions -----------------------------------------------------------


def sum(a, axis: int | tuple[int, ...] | None = None) -> Tensor:  # noqa: A001
    a = as_tensor(a)

    def bw(g):
        grad = g[0]
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, a.shape).copy(),)

    return _record((a,), [a.data.sum(axis=axis)], bw)[0]


def mean(a, axis: int | tuple[int, ...] | None = None) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis), 1.0 / count)


# -- linear algebra -------------------------------------------------------


def matmul(a, b) -> Tensor:
    """``np.matmul`` semantics for operands with ndim >= 2."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ContractError("matmul operands must be at least 2-D")
    if a.shape[-1] != b.shape[-2]:
        raise ContractError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def bw(g):
        ga = np.matmul(g[0], np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g[0])
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record((a, b), [np.matmul(a.data, b.data)], bw)[0]


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` over the last axis; ``weight`` is (out, in)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[1]:
        raise ContractError(f"linear: input width {x.shape[-1]} != weight in-width {weight.shape[1]}")
    out = x.data @ weight.data.T
    inputs: tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        inputs = (x, weight, bias)

    def bw(g):
        gy = g[0]
        flat_g = gy.reshape(-1, gy.shape[-1])
        flat_x = x.data.reshape(-1, x.shape[-1])
        grads = [gy @ weight.data, flat_g.T @ flat_x]
        if bias is not None:
            grads.append(flat_g.sum(axis=0))
        return grads

    return _record(inputs, [out], bw)[0]


# -- normalisation --------------------------------------------------------


def softmax_array(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax on a raw array."""
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0 or v.shape[axis] == 0:
        raise ContractError("softmax needs at least one entry")
    if not np.all(np.isfinite(v)):
        raise ContractError("softmax input contains non-finite values")
    e = np.exp(v - v.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    s = softmax_array(a.data, axis)

    def bw(g):
        return (s * (g[0] - (g[0] * s).sum(axis=axis, keepdims=True)),)

    return _record((a,), [s], bw)[0]


# -- structural -----------------------------------------------------------


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def bw(g):
        return np.split(g[0], cuts, axis=axis)

    return _record(ts, [np.concatenate([t.data for t in ts], axis=axis)], bw)[0]


def stack(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]

    def bw(g):
        return [np.take(g[0], i, axis=axis) for i in range(len(ts))]

    return _record(ts, [np.stack([t.data for t in ts], axis=axis)], bw)[0]


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    return _record((a,), [a.data.reshape(shape)], lambda g: (g[0].reshape(a.shape),))[0]


def getitem(a, index) -> Tensor:
    """Basic (non-fancy) indexing; the gradient scatters back into place."""
    a = as_tensor(a)

    def bw(g):
        out = np.zeros_like(a.data)
        out[index] = g[0]
        return (out,)

    return _record((a,), [a.data[index]], bw)[0]
