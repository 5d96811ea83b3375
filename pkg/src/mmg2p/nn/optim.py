from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState, hyper: AdamHyper = AdamHyper()) -> list:
    """Bias-corrected Adam update; returns new parameter arrays and advances ``state``.

    ``params`` and ``grads`` are parallel lists of arrays; a ``None`` gradient is zero.
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    c1 = 1.0 - hyper.beta1 ** state.step
    c2 = 1.0 - hyper.beta2 ** state.step
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ValueError(f"adam_step: gradient shape {g.shape} != parameter shape {p.shape}")
        m = state.m[i] = hyper.beta1 * state.m[i] + (1 - hyper.beta1) * g
        v = state.v[i] = hyper.beta2 * state.v[i] + (1 - hyper.beta2) * g * g
        update = hyper.lr * (m / c1) / (np.sqrt(v / c2) + hyper.eps)
        out.append((p - update).astype(p.dtype, copy=False))
    return out


class Adam:
    def __init__(self, params, hyper: AdamHyper = AdamHyper(), clip_norm: float | None = 5.0):
        self.params = list(params)
        self.hyper = hyper
        self.state = AdamState()
        self.clip_norm = clip_norm

    def step(self):
        grads = [p.grad for p in self.params]
        if self.clip_norm is not None:
            total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum())
                                      for g in grads if g is not None)))
            if total > self.clip_norm:
                scale = self.clip_norm / total
                grads = [None if g is None else g * scale for g in grads]
        new = adam_step([p.data for p in self.params], grads, self.state, self.hyper)
        for p, value in zip(self.params, new):
            p.data = value

    def zero_grad(self):
        for p in self.params:
            p.grad = None
