"""Reverse-mode autodiff over numpy arrays.

Small closure-tape engine in the micrograd style: every op builds the output
array eagerly with numpy, records a backward closure, and `Tensor.backward()`
replays the closures in reverse topological order.  Only what the GPT model
needs is implemented; every op keeps full-precision semantics in whatever the
global dtype is set to (float32 for training, float64 for gradient checks).
"""

from __future__ import annotations

import numpy as np

_DTYPE = np.float32


def set_default_dtype(name):
    """Switch the global compute dtype ('float32' or 'float64')."""
    global _DTYPE
    if name not in ("float32", "float64"):
        raise ValueError(f"unsupported dtype {name!r}")
    _DTYPE = np.float32 if name == "float32" else np.float64


def get_default_dtype():
    return "float32" if _DTYPE is np.float32 else "float64"


class NonFiniteError(RuntimeError):
    """Raised when a NaN/Inf crosses an explicit check barrier."""


_GRAD_ENABLED = True


class no_grad:
    """Context manager that skips graph recording (for evaluation passes)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self.prev = _GRAD_ENABLED
        _GRAD_ENABLED = False

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self.prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_prev")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Backprop from this scalar through the recorded graph.

        Leaf grads accumulate across calls (micro-batching relies on this);
        interior grads are freshly zeroed here and the graph is released
        afterwards so per-step memory does not grow.
        """
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo, seen, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._prev:
                stack.append((p, False))
        for node in topo:
            if node._prev:
                node.grad = np.zeros_like(node.data)
            elif node.grad is None:
                node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
        for node in topo:
            if node._prev:
                node._backward = None
                node._prev = ()


def assert_finite(t, what="tensor"):
    """Error barrier: NaN/Inf must never propagate silently past this."""
    data = t.data if isinstance(t, Tensor) else t
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite values in {what}")
    return t


def _sum_to(g, shape):
    # reduce a broadcast gradient back to the operand's shape
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _make(data, parents):
    out = Tensor(data)
    if not _GRAD_ENABLED:
        return out
    parents = tuple(p for p in parents if isinstance(p, Tensor))
    if any(p.requires_grad or p._prev for p in parents):
        out.requires_grad = True
        out._prev = parents
    return out


def add(a, b):
    out = _make(a.data + b.data, (a, b))
    if out._prev:
        def _bw():
            a.grad += _sum_to(out.grad, a.data.shape)
            b.grad += _sum_to(out.grad, b.data.shape)
        out._backward = _bw
    return out


def mul(a, b):
    if not isinstance(b, Tensor):  # scalar scale
        out = _make(a.data * b, (a,))
        if out._prev:
            def _bw():
                a.grad += out.grad * b
            out._backward = _bw
        return out
    out = _make(a.data * b.data, (a, b))
    if out._prev:
        def _bw():
            a.grad += _sum_to(out.grad * b.data, a.data.shape)
            b.grad += _sum_to(out.grad * a.data, b.data.shape)
        out._backward = _bw
    return out


def matmul(a, b):
    out = _make(np.matmul(a.data, b.data), (a, b))
    if out._prev:
        def _bw():
            a.grad += _sum_to(np.matmul(out.grad, np.swapaxes(b.data, -1, -2)), a.data.shape)
            b.grad += _sum_to(np.matmul(np.swapaxes(a.data, -1, -2), out.grad), b.data.shape)
        out._backward = _bw
    return out


def masked_matmul(x, w, mask, transpose_w=False):
    """x @ (w * mask), or x @ (w * mask).T when transpose_w.

    The forward pass sees only surviving weights, but the weight gradient is
    computed densely (mask NOT applied), so scores for currently inactive
    connections are available to gradient-based regrowth.
    """
    wm = w.data * mask
    out = _make(np.matmul(x.data, wm.T if transpose_w else wm), (x, w))
    if out._prev:
        def _bw():
            g2 = out.grad.reshape(-1, out.grad.shape[-1])
            x2 = x.data.reshape(-1, x.data.shape[-1])
            if transpose_w:
                x.grad += np.matmul(out.grad, wm)
                w.grad += g2.T @ x2
            else:
                x.grad += np.matmul(out.grad, wm.T)
                w.grad += x2.T @ g2
        out._backward = _bw
    return out


_GELU_C = 0.7978845608028654  # sqrt(2/pi)


def gelu(x):
    """tanh-approximation GELU."""
    d = x.data
    d2 = d * d
    t = np.tanh(_GELU_C * (d + 0.044715 * d2 * d))
    out = _make(0.5 * d * (1.0 + t), (x,))
    if out._prev:
        def _bw():
            du = _GELU_C * (1.0 + 3 * 0.044715 * d2)
            x.grad += out.grad * (0.5 * (1.0 + t) + 0.5 * d * (1.0 - t * t) * du)
        out._backward = _bw
    return out


def layernorm(x, gain, eps=1e-5):
    """Layer norm over the last axis with a learned gain and no bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = _make(gain.data * xhat, (x, gain))
    if out._prev:
        def _bw():
            n = x.data.shape[-1]
            dxhat = out.grad * gain.data
            gain.grad += _sum_to(out.grad * xhat, gain.data.shape)
            x.grad += inv * (dxhat
                             - dxhat.mean(axis=-1, keepdims=True)
                             - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / n)
        out._backward = _bw
    return out


def softmax_masked(scores, additive_mask):
    """Row softmax of scores + additive_mask (entries 0 or -inf).

    The mask is a constant ndarray broadcastable to scores; -inf entries get
    exactly zero probability and zero gradient.
    """
    z = scores.data + additive_mask
    z -= z.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    p = z
    out = _make(p, (scores,))
    if out._prev:
        def _bw():
            dot = (out.grad * p).sum(axis=-1, keepdims=True)
            scores.grad += p * (out.grad - dot)
        out._backward = _bw
    return out


def embedding(table, ids, mask=None):
    """Row gather table[ids]; masked rows read as weight*mask, grads dense."""
    tm = table.data * mask if mask is not None else table.data
    out = _make(tm[ids], (table,))
    if out._prev:
        def _bw():
            np.add.at(table.grad, ids, out.grad)
        out._backward = _bw
    return out


def reshape(x, shape):
    out = _make(x.data.reshape(shape), (x,))
    if out._prev:
        def _bw():
            x.grad += out.grad.reshape(x.data.shape)
        out._backward = _bw
    return out


def transpose(x, axes):
    out = _make(np.transpose(x.data, axes), (x,))
    if out._prev:
        inv = np.argsort(axes)
        def _bw():
            x.grad += np.transpose(out.grad, inv)
        out._backward = _bw
    return out


def cross_entropy(logits, targets):
    """Mean NLL of integer targets under softmax(logits); logits (N, V)."""
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    n = logits.data.shape[0]
    nll = -logp[np.arange(n), targets]
    out = _make(nll.mean(), (logits,))
    if out._prev:
        def _bw():
            g = np.exp(logp)
            g[np.arange(n), targets] -= 1.0
            logits.grad += out.grad * g / n
        out._backward = _bw
    return out


def mean_all(x):
    out = _make(x.data.mean(), (x,))
    if out._prev:
        def _bw():
            x.grad += out.grad / x.data.size
        out._backward = _bw
    return out


def sum_all(x):
    out = _make(x.data.sum(), (x,))
    if out._prev:
        def _bw():
            x.grad += out.grad
        out._backward = _bw
    return out
