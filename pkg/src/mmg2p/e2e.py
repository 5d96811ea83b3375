"""End-to-end baselines: one model maps a 5-token window straight to the middle
word's pronunciation, ezafe included.

The Transformer variant reads the window as a single character string with the
outer words separated by ``#`` and the middle word in parentheses::

    w1#w2(w3)w4#w5
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .context import ContextConfig, HomographModel
from .nn.checkpoint import register
from .nn.tensor import default_dtype
from .seq2seq import (Decoded, TransformerSeq2Seq, TrainLog, Vocab, decode_one, fit, greedy,
                      pad_batch, target_vocab, teacher_forcing)
from .text import BORDER, CENTER, CLOSE, OPEN, PAD, UNK, Alphabet, Window5

RESERVED = (BORDER, OPEN, CLOSE)


def format_bordered(window: Window5, all_borders: bool = False) -> str:
    """Render a window; PAD words become empty segments."""
    segs = []
    for w in window.words:
        if w == PAD:
            segs.append("")
            continue
        bad = [c for c in RESERVED if c in w]
        if bad:
            raise ValueError(f"word {w!r} contains reserved symbol {bad[0]!r}")
        segs.append(w)
    sep = BORDER if all_borders else ""
    return (segs[0] + BORDER + segs[1] + sep + OPEN + segs[2] + CLOSE + sep + segs[3]
            + BORDER + segs[4])


def parse_bordered(text: str) -> Window5:
    """Inverse of :func:`format_bordered`; accepts ``#`` next to the parentheses or not."""
    if text.count(OPEN) != 1 or text.count(CLOSE) != 1:
        raise ValueError("bordered input needs exactly one '(' and one ')'")
    i, j = text.index(OPEN), text.index(CLOSE)
    if j < i:
        raise ValueError("')' precedes '('")
    left = text[:i].split(BORDER)
    right = text[j + 1:].split(BORDER)
    if len(left) == 3 and left[-1] == "":
        left = left[:-1]
    if len(right) == 3 and right[0] == "":
        right = right[1:]
    if len(left) != 2 or len(right) != 2:
        raise ValueError(f"cannot split {text!r} into five segments")
    middle = text[i + 1:j]
    return Window5(tuple(w if w else PAD for w in (*left, middle, *right)))


@dataclass(frozen=True)
class E2eConfig:
    dim: int = 64
    heads: int = 4
    ff: int = 128
    layers: int = 2
    dropout: float = 0.1
    max_src: int = 128
    max_tgt: int = 40
    lr: float = 1e-3
    batch: int = 32
    steps: int = 6000
    all_borders: bool = False


@register("e2e-transformer")
class E2eTransformer(TransformerSeq2Seq):
    def __init__(self, alphabet: Alphabet, cfg: E2eConfig = E2eConfig(), seed: int = 0):
        self.alphabet, self.cfg, self.seed = alphabet, cfg, seed
        self.src_vocab = Vocab(tuple(alphabet.graphemes) + RESERVED, (PAD, UNK))
        self.tgt_vocab = target_vocab(alphabet.phonemes)
        super().__init__(len(self.src_vocab), len(self.tgt_vocab), cfg.dim, cfg.heads, cfg.ff,
                         cfg.layers, cfg.dropout, max(cfg.max_src, cfg.max_tgt),
                         np.random.default_rng(seed))
        self.train_log = TrainLog()

    @property
    def config(self) -> dict:
        return {"alphabet": self.alphabet.canonical(), "model": asdict(self.cfg), "seed": self.seed}

    @classmethod
    def from_config(cls, config: dict) -> "E2eTransformer":
        return cls(Alphabet.from_text(config["alphabet"]), E2eConfig(**config["model"]),
                   config["seed"])

    def _src(self, windows) -> np.ndarray:
        texts = [format_bordered(w, self.cfg.all_borders) for w in windows]
        for t in texts:
            if len(t) > self.cfg.max_src:
                raise ValueError(f"bordered input longer than max_src={self.cfg.max_src}")
        return pad_batch([self.src_vocab.encode(t) for t in texts])

    def decode(self, windows, beam: int = 1) -> list:
        if not windows:
            return []
        if beam == 1:
            return greedy(self.stepper(self._src(windows)), len(windows), self.tgt_vocab,
                          self.cfg.max_tgt)
        return [decode_one(self.stepper(self._src([w])), self.tgt_vocab, self.cfg.max_tgt, beam)
                for w in windows]


@register("e2e-gru")
class E2eGru(HomographModel):
    """The five-token encoder with an attention GRU decoder, trained on ezafe-realised prons."""


def train_e2e(windows, targets, alphabet: Alphabet, arch: str = "transformer", cfg=None,
              seed: int = 0, steps: int | None = None):
    """Train an end-to-end model; ``targets`` include the ezafe suffix where present."""
    windows, targets = list(windows), list(targets)
    if not windows:
        raise ValueError("empty training set")
    for p in targets:
        alphabet.check_phonemes(p)
    if arch == "transformer":
        cfg = cfg or E2eConfig()
        with default_dtype(np.float32):
            model = E2eTransformer(alphabet, cfg, seed)

        def loss_fn(idx, rng):
            src = model._src([windows[i] for i in idx])
            tin, tout = teacher_forcing([targets[i] for i in idx], model.tgt_vocab)
            return model.loss(src, tin, tout, rng)

    elif arch == "gru_attention":
        cfg = cfg or ContextConfig(attention=True)
        with default_dtype(np.float32):
            model = E2eGru(alphabet, cfg, seed)

        def loss_fn(idx, rng):
            return model.loss([windows[i] for i in idx], [targets[i] for i in idx])

    else:
        raise ValueError(f"unknown e2e architecture {arch!r}")
    model.train_log = fit(model, len(windows), loss_fn, steps=steps or cfg.steps,
                          batch=cfg.batch, lr=cfg.lr, seed=seed + 1)
    return model


def predict_e2e(model, window: Window5, beam: int = 1) -> Decoded:
    return model.decode([window], beam)[0]
