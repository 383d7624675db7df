"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Every differentiable operation returns a new :class:`Tensor` that remembers
its inputs and a closure mapping the output gradient to input gradients.
:func:`backward` walks that record in reverse topological order.

Only what the MLPs and objectives of this package need is implemented:
matrix products, a handful of elementwise maps, sum/mean reductions,
logsumexp, row selection, concatenation and a row-wise Euclidean norm.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DimensionError, DomainError

__all__ = [
    "Tensor",
    "tensor",
    "backward",
    "matmul",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "exp",
    "log",
    "relu",
    "leaky_relu",
    "tanh",
    "square",
    "sqrt",
    "sigmoid",
    "softplus",
    "tsum",
    "mean",
    "logsumexp",
    "row_norm",
    "concat",
]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def is_leaf(self):
        return not self._parents

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __len__(self):
        return len(self.data)

    __add__ = lambda self, other: add(self, other)
    __radd__ = lambda self, other: add(other, self)
    __sub__ = lambda self, other: sub(self, other)
    __rsub__ = lambda self, other: sub(other, self)
    __mul__ = lambda self, other: mul(self, other)
    __rmul__ = lambda self, other: mul(other, self)
    __truediv__ = lambda self, other: div(self, other)
    __rtruediv__ = lambda self, other: div(other, self)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, other: matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return mean(self, axis)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn, op):
    """Wrap an op result; graph edges are only kept when a gradient can flow."""
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, tuple(parents), backward_fn, op)
    return Tensor(data, op=op)


# ---------------------------------------------------------------------------
# backward pass


def _topo_order(root):
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf requiring grad."""
    if not isinstance(loss, Tensor):
        raise ContractError("backward() expects a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# ---------------------------------------------------------------------------
# binary elementwise ops


def _check_broadcast(a, b, name):
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    for small, big in ((sa, sb), (sb, sa)):
        if int(np.prod(small)) == 1 and len(small) <= len(big):
            return
        # row vector against a matrix: (c,) or (1, c) vs (r, c)
        if len(big) == 2 and small in ((big[1],), (1, big[1])):
            return
    raise DimensionError(f"{name}: incompatible shapes {sa} and {sb}")


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape),
                            _unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "div")
    if np.any(b.data == 0):
        raise DomainError("div: division by zero")
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)), "div")


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


# ---------------------------------------------------------------------------
# unary elementwise ops


def neg(a):
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a):
    a = _as_tensor(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise DomainError("log: input must be strictly positive")
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a):
    a = _as_tensor(a)
    if np.any(a.data < 0):
        raise DomainError("sqrt: input must be nonnegative")
    out = np.sqrt(a.data)

    def _bw(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.where(out > 0, g * 0.5 / out, 0.0),)

    return _make(out, (a,), _bw, "sqrt")


def square(a):
    a = _as_tensor(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a, alpha=0.2):
    a = _as_tensor(a)
    slope = np.where(a.data > 0, 1.0, alpha)
    return _make(a.data * slope, (a,), lambda g: (g * slope,), "leaky_relu")


def tanh(a):
    a = _as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def _expit(x):
    return np.exp(-np.logaddexp(0.0, -x))


def sigmoid(a):
    a = _as_tensor(a)
    out = _expit(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softplus(a):
    """log(1 + exp(a)), evaluated without overflow."""
    a = _as_tensor(a)
    return _make(np.logaddexp(0.0, a.data), (a,), lambda g: (g * _expit(a.data),), "softplus")


# ---------------------------------------------------------------------------
# reductions


def _check_axis(t, axis):
    if axis is not None and not -t.ndim <= axis < t.ndim:
        raise DimensionError(f"axis {axis} out of range for rank {t.ndim}")


def tsum(a, axis=None):
    a = _as_tensor(a)
    _check_axis(a, axis)
    shape = a.shape

    def _bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(a.data.sum(axis=axis), (a,), _bw, "sum")


def mean(a, axis=None):
    a = _as_tensor(a)
    _check_axis(a, axis)
    n = a.data.size if axis is None else a.shape[axis]
    if n == 0:
        raise ContractError("mean of an empty extent")
    return tsum(a, axis) * (1.0 / n)


def logsumexp(a, axis=-1):
    """Max-shifted log(sum(exp(a))) along ``axis``."""
    a = _as_tensor(a)
    _check_axis(a, axis)
    m = a.data.max(axis=axis, keepdims=True)
    shifted = np.exp(a.data - m)
    total = shifted.sum(axis=axis, keepdims=True)
    out = (m + np.log(total)).squeeze(axis)
    weights = shifted / total

    def _bw(g):
        return (np.expand_dims(g, axis) * weights,)

    return _make(out, (a,), _bw, "logsumexp")


def row_norm(a):
    """Euclidean norm of each row of a 2-D tensor; zero rows get a zero subgradient."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"row_norm expects a matrix, got shape {a.shape}")
    out = np.sqrt(np.einsum("ij,ij->i", a.data, a.data))

    def _bw(g):
        scale = np.divide(g, out, out=np.zeros_like(out), where=out > 0)
        return (a.data * scale[:, None],)

    return _make(out, (a,), _bw, "row_norm")


# ---------------------------------------------------------------------------
# structural ops


def take(a, index):
    a = _as_tensor(a)
    out = a.data[index]
    shape = a.shape

    def _bw(g):
        full = np.zeros(shape)
        if isinstance(index, slice):
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _make(out, (a,), _bw, "take")


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"concat: incompatible shapes {shapes}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _make(out, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)), "concat")
