"""Parameterised layers built on :mod:`mmg2p.nn.ops`."""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .tensor import Tensor, get_default_dtype


class Module:
    """Container whose parameters are discovered from attributes in assignment order."""

    # inference mode until a training loop calls train()
    training = False

    def named_parameters(self, prefix: str = ""):
        for name, value in vars(self).items():
            yield from _walk(value, prefix + name)

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict):
        own = dict(self.named_parameters())
        missing = own.keys() - state.keys()
        extra = state.keys() - own.keys()
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ValueError(f"{name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.dtype, copy=True)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def modules(self):
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for v in value:
                    if isinstance(v, Module):
                        yield from v.modules()


def _walk(value, name):
    if isinstance(value, Tensor):
        if value.requires_grad:
            yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(name + ".")
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            yield from _walk(v, f"{name}.{i}")


def param(array) -> Tensor:
    return Tensor(np.asarray(array, dtype=get_default_dtype()), requires_grad=True)


def uniform_fan_in(rng: np.random.Generator, fan_in: int, shape) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return param(rng.uniform(-bound, bound, size=shape))


def zeros(shape) -> Tensor:
    return param(np.zeros(shape))


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = uniform_fan_in(rng, n_in, (n_in, n_out))
        self.bias = zeros((n_out,)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise ops.ShapeError("linear", x.shape, self.weight.shape)
        y = x @ self.weight
        return y + self.bias if self.bias is not None else y


class Embedding(Module):
    def __init__(self, n: int, dim: int, rng: np.random.Generator):
        self.weight = param(rng.normal(0.0, 1.0 / math.sqrt(dim), size=(n, dim)))

    def __call__(self, ids) -> Tensor:
        return ops.embedding(self.weight, ids)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gamma = param(np.ones(dim))
        self.beta = zeros((dim,))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta)


class GRUCell(Module):
    """Standard GRU cell (reset, update, candidate) with PyTorch gate ordering."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.w_ih = uniform_fan_in(rng, hidden, (n_in, 3 * hidden))
        self.w_hh = uniform_fan_in(rng, hidden, (hidden, 3 * hidden))
        self.b_ih = zeros((3 * hidden,))
        self.b_hh = zeros((3 * hidden,))

    def project(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.w_ih.shape[0]:
            raise ops.ShapeError("gru_cell", x.shape, self.w_ih.shape)
        return x @ self.w_ih + self.b_ih

    def step(self, gi: Tensor, h: Tensor, mask=None) -> Tensor:
        return ops.gru_step(gi, h, self.w_hh, self.b_hh, mask)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return self.step(self.project(x), h)

    def initial(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.hidden), dtype=self.w_hh.dtype))


def gru_cell(x: Tensor, h_prev: Tensor, cell: GRUCell) -> Tensor:
    return cell(x, h_prev)


class GRU(Module):
    """Unidirectional GRU over (batch, time, features) with right padding."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator, reverse: bool = False):
        self.cell = GRUCell(n_in, hidden, rng)
        self.reverse = reverse

    def __call__(self, x: Tensor, lengths=None, h0: Tensor | None = None):
        batch, steps = x.shape[0], x.shape[1]
        if steps == 0:
            raise ValueError("GRU: empty sequence")
        mask = None
        if lengths is not None:
            lengths = np.asarray(lengths)
            mask = np.arange(steps)[None, :] < lengths[:, None]
        gi = self.cell.project(x)
        h = h0 if h0 is not None else self.cell.initial(batch)
        order = range(steps - 1, -1, -1) if self.reverse else range(steps)
        outputs = [None] * steps
        for t in order:
            h = self.cell.step(gi[:, t], h, None if mask is None else mask[:, t])
            outputs[t] = h
        return ops.stack(outputs, axis=1), h


class BiGRU(Module):
    """Bidirectional GRU; per-step states are [forward; backward] concatenated."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        self.fwd = GRU(n_in, hidden, rng)
        self.bwd = GRU(n_in, hidden, rng, reverse=True)

    def __call__(self, x: Tensor, lengths=None):
        out_f, h_f = self.fwd(x, lengths)
        out_b, h_b = self.bwd(x, lengths)
        return ops.concat([out_f, out_b], axis=-1), h_f, h_b


def bigru(x: Tensor, layer: BiGRU, lengths=None):
    return layer(x, lengths)


def sinusoidal_positions(steps: int, dim: int, dtype=None) -> np.ndarray:
    pos = np.arange(steps)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(dtype or get_default_dtype())


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads:
            raise ValueError(f"model width {dim} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(dim, dim, rng)
        self.k = Linear(dim, dim, rng)
        self.v = Linear(dim, dim, rng)
        self.o = Linear(dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        return x.reshape(b, t, self.heads, d // self.heads).transpose(0, 2, 1, 3)

    def __call__(self, x: Tensor, memory: Tensor, mask=None) -> Tensor:
        """``mask``: boolean (batch, Tq, Tk), True = may attend."""
        b, t, d = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(memory)), self._split(self.v(memory))
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)[:, None]
        ctx = ops.attention(q, k, v, mask)
        return self.o(ctx.transpose(0, 2, 1, 3).reshape(b, t, d))


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.up = Linear(dim, hidden, rng)
        self.down = Linear(hidden, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.down(ops.relu(self.up(x)))


class TransformerBlock(Module):
    """Post-norm Transformer layer; with ``cross=True`` it also attends to a memory."""

    def __init__(self, dim: int, heads: int, ff: int, rng: np.random.Generator,
                 dropout: float = 0.0, cross: bool = False):
        self.self_attn = MultiHeadAttention(dim, heads, rng)
        self.norm1 = LayerNorm(dim)
        self.cross_attn = MultiHeadAttention(dim, heads, rng) if cross else None
        self.norm_c = LayerNorm(dim) if cross else None
        self.ff = FeedForward(dim, ff, rng)
        self.norm2 = LayerNorm(dim)
        self.dropout = dropout

    def __call__(self, x: Tensor, mask=None, causal: bool = False, memory: Tensor | None = None,
                 memory_mask=None, rng: np.random.Generator | None = None) -> Tensor:
        """``mask``: boolean (batch, T) marking real (non-pad) positions."""
        b, t, _ = x.shape
        allowed = np.ones((b, t, t), dtype=bool)
        if mask is not None:
            allowed &= np.asarray(mask, dtype=bool)[:, None, :]
        if causal:
            allowed &= np.tril(np.ones((t, t), dtype=bool))[None]
        # a fully padded query row would have nothing to attend to; let it see itself
        allowed |= np.eye(t, dtype=bool)[None]
        drop = self.dropout if self.training else 0.0
        h = ops.dropout(self.self_attn(x, x, allowed), drop, rng, self.training)
        x = self.norm1(x + h)
        if self.cross_attn is not None:
            mem_allowed = None
            if memory_mask is not None:
                mem_allowed = np.broadcast_to(
                    np.asarray(memory_mask, dtype=bool)[:, None, :], (b, t, memory.shape[1]))
            h = ops.dropout(self.cross_attn(x, memory, mem_allowed), drop, rng, self.training)
            x = self.norm_c(x + h)
        h = ops.dropout(self.ff(x), drop, rng, self.training)
        return self.norm2(x + h)


def transformer_block(x: Tensor, block: TransformerBlock, mask=None, causal: bool = False) -> Tensor:
    return block(x, mask=mask, causal=causal)
