"""A small reverse-mode automatic differentiation tape over numpy arrays.

Every operation records its parents and a closure mapping the output
gradient to parent gradients.  ``Tensor.backward`` walks the recorded
graph in reverse topological order and accumulates ``.grad`` on every
tensor created with ``requires_grad=True``.

Only the handful of operations the model needs are provided.  Values are
kept at whatever dtype the inputs carry; gradient checks run at float64.
"""
from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True
_branch_log = None


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation forwards)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def record_branches():
    """Collect the branch taken by every piecewise op (ReLU masks, max indices).

    Two evaluations with equal records lie on the same smooth piece of the
    function, which is what a finite-difference comparison needs.
    """
    global _branch_log
    prev = _branch_log
    _branch_log = entries = []
    try:
        yield entries
    finally:
        _branch_log = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def numpy(self):
        return self.data

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``.grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = _topological(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topological(root):
    order = []
    seen = set()
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


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.data.shape, b.data.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def matmul(a, b):
    """Matrix product for 1-D or 2-D operands."""
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if ad.ndim == 1:
            return bd @ g, np.outer(ad, g)
        if bd.ndim == 1:
            return np.outer(g, bd), ad.T @ g
        return g @ bd.T, ad.T @ g

    return _make(ad @ bd, (a, b), backward)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` with x of shape (..., in) and weight (out, in)."""
    x, weight = as_tensor(x), as_tensor(weight)
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = (x, weight, bias)

    def backward(g):
        gx = g @ wd
        g2 = g.reshape(-1, g.shape[-1])
        gw = g2.T @ xd.reshape(-1, xd.shape[-1])
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return _make(out, parents, backward)


def sigmoid(x):
    x = as_tensor(x)
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _make(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x):
    x = as_tensor(x)
    t = np.tanh(x.data)
    return _make(t, (x,), lambda g: (g * (1.0 - t * t),))


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    if _branch_log is not None:
        _branch_log.append(mask.tobytes())
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def exp(x):
    x = as_tensor(x)
    e = np.exp(x.data)
    return _make(e, (x,), lambda g: (g * e,))


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(data, tuple(tensors), backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make(data, tuple(tensors), backward)


def take(x, index):
    """Gather along the first axis; ``index`` may have any shape."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    shape = x.data.shape

    def backward(g):
        out = np.zeros(shape, dtype=g.dtype)
        np.add.at(out, index, g)
        return (out,)

    return _make(x.data[index], (x,), backward)


def _is_basic(key):
    if not isinstance(key, tuple):
        key = (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is Ellipsis or k is None
               for k in key)


def getitem(x, key):
    x = as_tensor(x)
    shape = x.data.shape
    basic = _is_basic(key)

    def backward(g):
        out = np.zeros(shape, dtype=g.dtype)
        if basic:
            out[key] = g  # basic indexing never repeats an element
        else:
            np.add.at(out, key, g)
        return (out,)

    return _make(x.data[key], (x,), backward)


def max(x, axis):
    """Maximum along ``axis``; the gradient goes to the first maximal entry."""
    x = as_tensor(x)
    xd = x.data
    idx = np.expand_dims(np.argmax(xd, axis=axis), axis)
    if _branch_log is not None:
        _branch_log.append(idx.tobytes())
    out = np.take_along_axis(xd, idx, axis=axis)

    def backward(g):
        full = np.zeros_like(xd)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
        return (full,)

    return _make(np.squeeze(out, axis=axis), (x,), backward)


def sum(x, axis=None):
    x = as_tensor(x)
    shape = x.data.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _make(x.data.sum(axis=axis), (x,), backward)


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _make(out, (x,), backward)


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return _make(p, (x,), backward)


def log(x):
    x = as_tensor(x)
    xd = x.data
    return _make(np.log(xd), (x,), lambda g: (g / xd,))
