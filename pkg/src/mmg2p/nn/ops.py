"""Differentiable primitives.

Shape errors name the op and both operand shapes.  Each op computes its
forward result with numpy and registers a closure for the reverse sweep.
"""

from __future__ import annotations

import builtins

import numpy as np

from .tensor import Tensor, as_tensor, get_default_dtype, make_result


class ShapeError(ValueError):
    def __init__(self, op: str, a, b, detail: str = ""):
        msg = f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _send(t: Tensor, g):
    if t.requires_grad:
        t._accumulate(g)


def _const(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else get_default_dtype()
    return Tensor(np.asarray(x, dtype=dtype))


def _broadcast_check(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


# elementwise --------------------------------------------------------------

def add(a, b) -> Tensor:
    a = _const(a, b if isinstance(b, Tensor) else None)
    b = _const(b, a)
    _broadcast_check("add", a, b)

    def backward(g):
        _send(a, _unbroadcast(g, a.shape))
        _send(b, _unbroadcast(g, b.shape))

    return make_result(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a = _const(a, b if isinstance(b, Tensor) else None)
    b = _const(b, a)
    _broadcast_check("sub", a, b)

    def backward(g):
        _send(a, _unbroadcast(g, a.shape))
        _send(b, _unbroadcast(-g, b.shape))

    return make_result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b) -> Tensor:
    a = _const(a, b if isinstance(b, Tensor) else None)
    b = _const(b, a)
    _broadcast_check("mul", a, b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return make_result(a.data * b.data, (a, b), backward, "mul")


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)

    def backward(g):
        _send(x, g * y * (1 - y))

    return make_result(y, (x,), backward, "sigmoid")


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * np.tanh(0.5 * v) + 0.5


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward(g):
        _send(x, g * (1 - y * y))

    return make_result(y, (x,), backward, "tanh")


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0)

    def backward(g):
        _send(x, g * (x.data > 0))

    return make_result(y, (x,), backward, "relu")


def where(mask, x: Tensor, fill: float) -> Tensor:
    """Keep ``x`` where ``mask`` is true, ``fill`` elsewhere (mask is constant)."""
    mask = np.asarray(mask, dtype=bool)
    _broadcast_check("where", x, mask)
    y = np.where(mask, x.data, np.asarray(fill, dtype=x.dtype)).astype(x.dtype, copy=False)

    def backward(g):
        _send(x, _unbroadcast(g * mask, x.shape))

    return make_result(y, (x,), backward, "where")


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    if not train or p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)

    def backward(g):
        _send(x, g * keep)

    return make_result(x.data * keep, (x,), backward, "dropout")


# linear algebra -----------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        y = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape) from None

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            if b.ndim == 2:
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
            b._accumulate(gb)

    return make_result(y, (a, b), backward, "matmul")


# shape manipulation -------------------------------------------------------

def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    ax = axis % xs[0].ndim
    for x in xs[1:]:
        if x.ndim != xs[0].ndim or any(
            i != ax and p != q for i, (p, q) in enumerate(zip(xs[0].shape, x.shape))
        ):
            raise ShapeError("concat", xs[0].shape, x.shape, f"axis={axis}")
    y = np.concatenate([x.data for x in xs], axis=ax)
    bounds = np.cumsum([x.shape[ax] for x in xs])[:-1]

    def backward(g):
        for x, part in zip(xs, np.split(g, bounds, axis=ax)):
            _send(x, part)

    return make_result(y, xs, backward, "concat")


def stack(xs, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    for x in xs[1:]:
        if x.shape != xs[0].shape:
            raise ShapeError("stack", xs[0].shape, x.shape)
    y = np.stack([x.data for x in xs], axis=axis)

    def backward(g):
        for i, x in enumerate(xs):
            _send(x, np.take(g, i, axis=axis))

    return make_result(y, xs, backward, "stack")


def _is_basic(index) -> bool:
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)


def getitem(x: Tensor, index) -> Tensor:
    y = x.data[index]
    basic = _is_basic(index)

    def backward(g):
        if not x.requires_grad:
            return
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        if basic:
            # basic indexing never repeats an element
            x.grad[index] += g
        else:
            np.add.at(x.grad, index, g)

    return make_result(np.array(y, copy=True), (x,), backward, "getitem")


def reshape(x: Tensor, shape) -> Tensor:
    try:
        y = x.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", x.shape, shape) from None

    def backward(g):
        _send(x, g.reshape(x.shape))

    return make_result(y, (x,), backward, "reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    y = np.transpose(x.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def backward(g):
        _send(x, np.transpose(g, inv))

    return make_result(y, (x,), backward, "transpose")


def sum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    y = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g):
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        _send(x, np.broadcast_to(g, x.shape))

    return make_result(np.asarray(y), (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis, keepdims), 1.0 / float(n))


# lookups and normalisation -------------------------------------------------

def embedding(weight: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= weight.shape[0]):
        raise IndexError(f"embedding: ids outside [0, {weight.shape[0]})")
    y = weight.data[ids]

    def backward(g):
        if weight.requires_grad:
            flat = ids.reshape(-1)
            rows = g.reshape(-1, weight.shape[1])
            if weight.shape[0] * flat.size <= 4_000_000:
                onehot = np.zeros((weight.shape[0], flat.size), dtype=rows.dtype)
                onehot[flat, np.arange(flat.size)] = 1
                full = onehot @ rows
            else:
                full = np.zeros_like(weight.data)
                np.add.at(full, flat, rows)
            weight._accumulate(full)

    return make_result(y, (weight,), backward, "embedding")


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        _send(x, y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return make_result(y, (x,), backward, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse

    def backward(g):
        _send(x, g - np.exp(y) * g.sum(axis=-1, keepdims=True))

    return make_result(y, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gamma.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, d).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            x._accumulate(
                inv * (gx - gx.mean(axis=-1, keepdims=True)
                       - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            )

    return make_result(y.astype(x.dtype, copy=False), (x, gamma, beta), backward, "layer_norm")


def cross_entropy(logits: Tensor, targets, pad_index: int | None = None) -> Tensor:
    """Mean negative log-likelihood over positions whose target is not ``pad_index``."""
    targets = np.asarray(targets, dtype=np.int64)
    v = logits.shape[-1]
    if logits.shape[:-1] != targets.shape:
        raise ShapeError("cross_entropy", logits.shape, targets.shape)
    flat = logits.data.reshape(-1, v)
    t = targets.reshape(-1)
    if t.size and (t.min() < 0 or t.max() >= v):
        raise IndexError("cross_entropy: target outside vocabulary")
    keep = np.ones_like(t, dtype=bool) if pad_index is None else t != pad_index
    n = int(keep.sum())
    z = flat - flat.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    rows = np.arange(t.size)
    nll = -logp[rows, t]
    loss = np.asarray(nll[keep].sum() / builtins.max(n, 1), dtype=logits.dtype)

    def backward(g):
        if logits.requires_grad and n:
            grad = np.exp(logp)
            grad[rows, t] -= 1.0
            grad *= keep[:, None] * (g / n)
            logits._accumulate(grad.reshape(logits.shape))

    return make_result(loss, (logits,), backward, "cross_entropy")


# recurrent ----------------------------------------------------------------

def gru_step(gi: Tensor, h: Tensor, w_hh: Tensor, b_hh: Tensor, mask=None) -> Tensor:
    """One GRU update given precomputed input projections ``gi = x @ W_ih + b_ih``.

    Gate layout along the last axis of ``gi`` and ``w_hh`` is (reset, update, new).
    Rows where ``mask`` is 0 carry ``h`` through unchanged.
    """
    hs = h.shape[-1]
    if gi.shape[-1] != 3 * hs or w_hh.shape != (hs, 3 * hs) or gi.shape[:-1] != h.shape[:-1]:
        raise ShapeError("gru_step", gi.shape, h.shape)
    gh = h.data @ w_hh.data + b_hh.data
    r = _sigmoid(gi.data[..., :hs] + gh[..., :hs])
    z = _sigmoid(gi.data[..., hs:2 * hs] + gh[..., hs:2 * hs])
    ghn = gh[..., 2 * hs:]
    n = np.tanh(gi.data[..., 2 * hs:] + r * ghn)
    new = (1 - z) * n + z * h.data
    if mask is not None:
        m = np.asarray(mask, dtype=h.dtype).reshape(h.shape[:-1] + (1,))
        y = m * new + (1 - m) * h.data
    else:
        m = None
        y = new

    def backward(g):
        dnew = g if m is None else g * m
        dn = dnew * (1 - z)
        dz = dnew * (h.data - n)
        dan = dn * (1 - n * n)
        dar = dan * ghn * r * (1 - r)
        daz = dz * z * (1 - z)
        dgi = np.concatenate([dar, daz, dan], axis=-1)
        dgh = np.concatenate([dar, daz, dan * r], axis=-1)
        _send(gi, dgi)
        if w_hh.requires_grad:
            w_hh._accumulate(h.data.reshape(-1, hs).T @ dgh.reshape(-1, 3 * hs))
        if b_hh.requires_grad:
            b_hh._accumulate(dgh.reshape(-1, 3 * hs).sum(axis=0))
        if h.requires_grad:
            dh = dnew * z + dgh @ w_hh.data.T
            if m is not None:
                dh = dh + g * (1 - m)
            h._accumulate(dh)

    return make_result(y.astype(h.dtype, copy=False), (gi, h, w_hh, b_hh), backward, "gru_step")


# attention ----------------------------------------------------------------

NEG_INF = -1e9


def attention(query: Tensor, keys: Tensor, values: Tensor, mask=None) -> Tensor:
    """Scaled dot-product attention.

    ``mask`` is boolean, broadcastable to (..., Tq, Tk); True marks keys that may be
    attended.  A query row with every key masked is an error.
    """
    if query.shape[-1] != keys.shape[-1]:
        raise ShapeError("attention", query.shape, keys.shape, "query/key width")
    if keys.shape[-2] != values.shape[-2]:
        raise ShapeError("attention", keys.shape, values.shape, "key/value steps")
    scores = matmul(query, transpose(keys, _swap_last(keys.ndim)))
    scores = mul(scores, 1.0 / np.sqrt(query.shape[-1]))
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        full = np.broadcast_to(mask, scores.shape)
        if not full.any(axis=-1).all():
            raise ValueError("attention: every key is masked for some query")
        scores = where(full, scores, NEG_INF)
    return matmul(softmax(scores), values)


def _swap_last(ndim: int) -> tuple:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)
