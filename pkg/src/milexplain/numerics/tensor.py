"""Define-by-run reverse-mode autodiff over float64 NumPy arrays.

Operations executed while a :class:`Tape` is active record themselves on it
whenever one of their inputs requires a gradient. Outside a tape every op is
a plain NumPy computation, which is the fast path used for inference and for
finite-difference checks.
"""
from __future__ import annotations

import logging

import numpy as np

from .. import kernels

log = logging.getLogger(__name__)

_ACTIVE: list["Tape"] = []
degenerate_count = 0


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


class DegenerateInputError(ValueError):
    pass


class Tensor:
    """A float64 array plus a flag saying whether gradients flow into it."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def values(self):
        return self.data.ravel()

    def __len__(self):
        return self.data.shape[0]

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    def item(self):
        return float(self.data)

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

    def __getitem__(self, idx):
        return take(self, idx)


class Tape:
    """Ordered record of the primitive ops of one forward pass.

    Nodes are appended as ops execute, so their order is already topological.
    """

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def backward(self, loss, params):
        return backward(self, loss, params)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def record(out_data, inputs, grad_fn):
    """Wrap ``out_data`` and, if a tape is live, register ``grad_fn``.

    ``grad_fn(g)`` maps the output gradient to one gradient (or None) per
    input, in order.
    """
    out = Tensor(out_data)
    if _ACTIVE and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _ACTIVE[-1].nodes.append((out, inputs, grad_fn))
    return out


def backward(tape, loss, params):
    """Gradients of scalar ``loss`` with respect to each tensor in ``params``.

    Parameters not reachable from the loss get zeros.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads = {id(loss): np.ones_like(loss.data)}
    for out, inputs, grad_fn in reversed(tape.nodes):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for inp, gi in zip(inputs, grad_fn(g)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
    result = []
    for p in params:
        g = grads.get(id(p))
        result.append(np.zeros_like(p.data) if g is None else np.reshape(g, p.shape))
    return result


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return record(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return record(a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return record(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape),
                             _unbroadcast(g * a.data, b.shape)))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim == 0 or b.data.ndim == 0 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    A, B = a.data, b.data

    def grad_fn(g):
        if A.ndim == 1 and B.ndim == 1:
            return g * B, g * A
        if A.ndim == 1:
            return B @ g, np.outer(A, g)
        if B.ndim == 1:
            return np.outer(g, B), A.T @ g
        return g @ B.T, A.T @ g

    return record(A @ B, (a, b), grad_fn)


def _sigmoid(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def unary_apply(x, fn):
    """Elementwise ``fn`` in {tanh, relu, sigmoid, exp, log}."""
    x = as_tensor(x)
    v = x.data
    if fn == "tanh":
        y = np.tanh(v)
        return record(y, (x,), lambda g: (g * (1.0 - y * y),))
    if fn == "relu":
        y = np.maximum(v, 0.0)
        return record(y, (x,), lambda g: (g * (v > 0),))
    if fn == "sigmoid":
        y = _sigmoid(v)
        return record(y, (x,), lambda g: (g * y * (1.0 - y),))
    if fn == "exp":
        y = np.exp(v)
        return record(y, (x,), lambda g: (g * y,))
    if fn == "log":
        bad = np.flatnonzero(v.ravel() <= 0)
        if bad.size:
            raise DomainError(f"log of non-positive value at flat index {int(bad[0])}")
        return record(np.log(v), (x,), lambda g: (g / v,))
    raise ValueError(f"unknown elementwise function {fn!r}")


def tanh(x):
    return unary_apply(x, "tanh")


def relu(x):
    return unary_apply(x, "relu")


def sigmoid(x):
    return unary_apply(x, "sigmoid")


def exp(x):
    return unary_apply(x, "exp")


def log_(x):
    return unary_apply(x, "log")


def square(x):
    x = as_tensor(x)
    v = x.data
    return record(v * v, (x,), lambda g: (2.0 * g * v,))


def sum_(x):
    x = as_tensor(x)
    return record(np.sum(x.data), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def take(x, idx):
    """Basic or fancy indexing; the gradient scatters back with ``np.add.at``."""
    x = as_tensor(x)

    def grad_fn(g):
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return (out,)

    return record(x.data[idx], (x,), grad_fn)


def reshape(x, shape):
    x = as_tensor(x)
    return record(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def concat(parts):
    parts = [as_tensor(p) for p in parts]
    sizes = np.cumsum([p.shape[0] for p in parts])[:-1]
    return record(np.concatenate([p.data for p in parts]), tuple(parts),
                  lambda g: tuple(np.split(g, sizes)))


def softmax(x):
    x = as_tensor(x)
    z = x.data - np.max(x.data)
    e = np.exp(z)
    y = e / e.sum()
    return record(y, (x,), lambda g: (y * (g - np.dot(g, y)),))


def log_softmax(x):
    x = as_tensor(x)
    z = x.data - np.max(x.data)
    lse = np.log(np.sum(np.exp(z)))
    y = z - lse
    return record(y, (x,), lambda g: (g - np.exp(y) * g.sum(),))


def l1_normalize(w):
    """``w / sum(w)`` for a non-negative vector with positive mass."""
    w = as_tensor(w)
    v = w.data
    s = np.sum(np.abs(v))
    if s <= 0:
        raise DegenerateInputError("l1_normalize of an all-zero vector")
    y = v / s
    sign = np.sign(v)
    return record(y, (w,), lambda g: ((g - np.dot(g, y) * sign) / s,))


def l1_normalize_or_uniform(w):
    """l1_normalize, substituting the uniform distribution for zero mass."""
    try:
        return l1_normalize(w)
    except DegenerateInputError:
        global degenerate_count
        degenerate_count += 1
        n = as_tensor(w).shape[0]
        level = logging.WARNING if degenerate_count == 1 else logging.DEBUG
        log.log(level, "all-zero attention scores over %d tokens; using uniform "
                "(further occurrences logged at debug level)", n)
        return Tensor(np.full(n, 1.0 / n))


def max_entry(x):
    """Largest entry; the gradient goes to the first maximiser."""
    x = as_tensor(x)
    k = int(np.argmax(x.data))

    def grad_fn(g):
        out = np.zeros_like(x.data)
        out.flat[k] = g
        return (out,)

    return record(x.data.flat[k], (x,), grad_fn)


def min_positive(x, eps=1e-8):
    """Smallest entry strictly above ``eps``; zero when no entry qualifies."""
    x = as_tensor(x)
    v = x.data.ravel()
    idx = np.flatnonzero(v > eps)
    if idx.size == 0:
        return Tensor(0.0)
    k = int(idx[np.argmin(v[idx])])

    def grad_fn(g):
        out = np.zeros_like(x.data)
        out.flat[k] = g
        return (out,)

    return record(v[k], (x,), grad_fn)


def entropy(p):
    """Shannon entropy in nats with 0 log 0 = 0."""
    p = as_tensor(p)
    v = p.data
    pos = v > 0
    logs = np.zeros_like(v)
    logs[pos] = np.log(v[pos])
    h = -np.sum(v * logs)
    return record(h, (p,), lambda g: (np.where(pos, -g * (logs + 1.0), 0.0),))


def lstm(x, W, U, b):
    """Whole-sequence LSTM from a zero state; returns hidden states (T x H)."""
    x, W, U, b = (as_tensor(t) for t in (x, W, U, b))
    if x.shape[1] != W.shape[1] or W.shape[0] != 4 * U.shape[1]:
        raise ShapeError(f"lstm shape mismatch: x{x.shape} W{W.shape} U{U.shape}")
    h, c, gates = kernels.lstm_forward(x.data, W.data, U.data, b.data)

    def grad_fn(g):
        return kernels.lstm_backward(g, x.data, W.data, U.data, h, c, gates)

    return record(h, (x, W, U, b), grad_fn)
