"""Finite-difference verification of the reverse-mode gradients."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import layers, ops
from .tensor import Tensor, default_dtype

# max relative error allowed per layer family
TOLERANCES = {
    "linear": 1e-5,
    "embedding": 1e-5,
    "layer_norm": 1e-5,
    "softmax": 1e-5,
    "gru_cell": 1e-5,
    "bigru": 1e-5,
    "attention": 1e-5,
    "cross_entropy": 1e-5,
    "transformer_block": 1e-4,
}


@dataclass
class GradCheckReport:
    name: str
    tolerance: float
    errors: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def max_rel_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    @property
    def failures(self) -> list:
        return [k for k, v in self.errors.items() if not v < self.tolerance]


def grad_check(fn, params: dict, epsilon: float = 1e-5, tolerance: float = 1e-5,
               name: str = "fragment", floor: float = 1e-4) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``fn()`` with central differences.

    ``params`` maps names to float64 tensors that ``fn`` reads.  The error for a
    tensor is ||analytic - numeric|| / max(||analytic|| + ||numeric||, floor); the
    floor keeps structurally zero gradients (e.g. a key bias under softmax) from
    turning rounding noise into a ratio of 1.
    """
    for key, p in params.items():
        if p.dtype != np.float64:
            raise ValueError(f"grad_check needs float64 tensors; {key} is {p.dtype}")
        p.requires_grad = True
        p.grad = None
    fn().backward()
    report = GradCheckReport(name, tolerance)
    for key, p in params.items():
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up = fn().item()
            flat[i] = orig - epsilon
            down = fn().item()
            flat[i] = orig
            numeric.reshape(-1)[i] = (up - down) / (2 * epsilon)
        denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
        err = float(np.linalg.norm(analytic - numeric) / max(denom, floor))
        report.errors[key] = err
    return report


def _probe(out: Tensor, rng) -> Tensor:
    # random projection to a scalar so every output element carries gradient
    w = rng.normal(size=out.shape)
    return ops.sum(ops.mul(out, w))


def _fixed_probe(rng):
    seed = int(rng.integers(1 << 30))
    return lambda out: _probe(out, np.random.default_rng(seed))


def _cases(kind: str, rng):
    probe = _fixed_probe(rng)
    if kind == "linear":
        n_in, n_out, b = (int(v) for v in rng.integers(1, 6, size=3))
        layer = layers.Linear(n_in, n_out, rng)
        x = Tensor(rng.normal(size=(b, n_in)))
        return (lambda: probe(layer(x))), {"x": x, **dict(layer.named_parameters())}
    if kind == "embedding":
        n, d, b = (int(v) for v in rng.integers(2, 6, size=3))
        layer = layers.Embedding(n, d, rng)
        ids = rng.integers(0, n, size=(b, 3))
        return (lambda: probe(layer(ids))), dict(layer.named_parameters())
    if kind == "layer_norm":
        d = int(rng.integers(2, 7))
        layer = layers.LayerNorm(d)
        layer.gamma.data = rng.normal(size=d)
        layer.beta.data = rng.normal(size=d)
        x = Tensor(rng.normal(size=(3, d)))
        return (lambda: probe(layer(x))), {"x": x, **dict(layer.named_parameters())}
    if kind == "softmax":
        x = Tensor(rng.normal(size=(int(rng.integers(1, 4)), int(rng.integers(2, 6)))))
        return (lambda: probe(ops.softmax(x))), {"x": x}
    if kind == "gru_cell":
        n_in, hid, b = (int(v) for v in rng.integers(1, 6, size=3))
        cell = layers.GRUCell(n_in, hid, rng)
        for p in cell.parameters():
            p.data = rng.normal(scale=0.5, size=p.shape)
        x = Tensor(rng.normal(size=(b, n_in)))
        h = Tensor(rng.normal(size=(b, hid)))
        return (lambda: probe(cell(x, h))), {"x": x, "h": h, **dict(cell.named_parameters())}
    if kind == "bigru":
        n_in, hid, b, t = (int(v) for v in rng.integers(1, 5, size=4))
        layer = layers.BiGRU(n_in, hid, rng)
        x = Tensor(rng.normal(size=(b, t, n_in)))
        lengths = rng.integers(1, t + 1, size=b)
        return (lambda: probe(layer(x, lengths)[0])), {"x": x, **dict(layer.named_parameters())}
    if kind == "attention":
        b, tq, tk, d = (int(v) for v in rng.integers(1, 5, size=4))
        q = Tensor(rng.normal(size=(b, tq, d)))
        k = Tensor(rng.normal(size=(b, tk, d)))
        v = Tensor(rng.normal(size=(b, tk, d)))
        mask = rng.random((b, 1, tk)) < 0.7
        mask[..., 0] = True
        return (lambda: probe(ops.attention(q, k, v, mask))), {"q": q, "k": k, "v": v}
    if kind == "cross_entropy":
        n, v = int(rng.integers(1, 6)), int(rng.integers(2, 6))
        logits = Tensor(rng.normal(size=(n, v)))
        targets = rng.integers(0, v, size=n)
        pad = int(rng.integers(0, v))
        if (targets == pad).all():
            targets[0] = (pad + 1) % v
        return (lambda: ops.cross_entropy(logits, targets, pad)), {"logits": logits}
    if kind == "transformer_block":
        heads = int(rng.integers(1, 3))
        dim = heads * int(rng.integers(1, 4))
        b, t = int(rng.integers(1, 3)), int(rng.integers(1, 4))
        causal = bool(rng.integers(0, 2))
        block = layers.TransformerBlock(dim, heads, int(rng.integers(2, 6)), rng)
        x = Tensor(rng.normal(size=(b, t, dim)))
        mask = np.ones((b, t), dtype=bool)
        if t > 1:
            mask[0, -1] = False
        return (lambda: probe(block(x, mask=mask, causal=causal))), \
            {"x": x, **dict(block.named_parameters())}
    raise KeyError(kind)


def run_suite(seed: int = 0, shapes: int = 20, epsilon: float = 1e-5) -> list:
    """Grad-check every layer family on ``shapes`` random configurations each."""
    rng = np.random.default_rng(seed)
    reports = []
    with default_dtype(np.float64):
        for kind, tol in TOLERANCES.items():
            start = time.perf_counter()
            merged = GradCheckReport(kind, tol)
            for i in range(shapes):
                fn, params = _cases(kind, rng)
                rep = grad_check(fn, params, epsilon, tol, kind)
                for key, err in rep.errors.items():
                    merged.errors[f"{i}:{key}"] = err
            merged.seconds = time.perf_counter() - start
            reports.append(merged)
    return reports
