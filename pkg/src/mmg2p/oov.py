"""Context-free character-level Transformer for out-of-vocabulary words."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .nn.checkpoint import register
from .nn.tensor import default_dtype
from .seq2seq import (Decoded, TransformerSeq2Seq, TrainLog, Vocab, blank_inputs, decode_one,
                      fit, greedy, pad_batch, target_vocab, teacher_forcing)
from .text import PAD, UNK, Alphabet

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OovConfig:
    dim: int = 64
    heads: int = 4
    ff: int = 128
    layers: int = 2
    dropout: float = 0.3
    # chance of blanking each decoder input symbol during training
    token_dropout: float = 0.2
    max_src: int = 32
    max_tgt: int = 40
    lr: float = 1e-3
    batch: int = 32
    steps: int = 4000


@register("oov")
class OovModel(TransformerSeq2Seq):
    """Graphemes in, phonemes out; the output vocabulary is phonemes plus PAD/BOS/EOS."""

    def __init__(self, alphabet: Alphabet, cfg: OovConfig = OovConfig(), seed: int = 0):
        self.alphabet = alphabet
        self.cfg = cfg
        self.src_vocab = Vocab(alphabet.graphemes, (PAD, UNK))
        self.tgt_vocab = target_vocab(alphabet.phonemes)
        super().__init__(len(self.src_vocab), len(self.tgt_vocab), cfg.dim, cfg.heads, cfg.ff,
                         cfg.layers, cfg.dropout, max(cfg.max_src, cfg.max_tgt),
                         np.random.default_rng(seed))
        self.seed = seed
        self.train_log = TrainLog()

    @property
    def config(self) -> dict:
        return {"alphabet": self.alphabet.canonical(), "model": asdict(self.cfg), "seed": self.seed}

    @classmethod
    def from_config(cls, config: dict) -> "OovModel":
        return cls(Alphabet.from_text(config["alphabet"]), OovConfig(**config["model"]),
                   config["seed"])

    def _src(self, words) -> np.ndarray:
        for w in words:
            if not w:
                raise ValueError("empty word")
            if len(w) > self.cfg.max_src:
                raise ValueError(f"word {w!r} longer than max_src={self.cfg.max_src}")
        return pad_batch([self.src_vocab.encode(w) for w in words])

    def predict(self, word: str, beam: int = 1) -> Decoded:
        return decode_one(self.stepper(self._src([word])), self.tgt_vocab, self.cfg.max_tgt, beam)

    def predict_batch(self, words) -> list:
        """Greedy decode of many words at once."""
        if not words:
            return []
        return greedy(self.stepper(self._src(words)), len(words), self.tgt_vocab, self.cfg.max_tgt)


def train_oov(pairs, alphabet: Alphabet, cfg: OovConfig = OovConfig(), seed: int = 0,
              steps: int | None = None) -> OovModel:
    """Teacher-forced training on (word, pron) pairs.

    ``pairs`` is a multiset: a word seen many times in the corpus is listed many
    times, so frequent words weigh more.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty training set")
    for w, p in pairs:
        if len(w) > cfg.max_src or len(p) > cfg.max_tgt:
            raise ValueError(f"training pair {w!r} exceeds the configured max lengths")
        alphabet.check_phonemes(p)
    with default_dtype(np.float32):
        model = OovModel(alphabet, cfg, seed)
    words = [w for w, _ in pairs]
    prons = [p for _, p in pairs]

    def loss_fn(idx, rng):
        src = model._src([words[i] for i in idx])
        tin, tout = teacher_forcing([prons[i] for i in idx], model.tgt_vocab)
        return model.loss(src, blank_inputs(tin, cfg.token_dropout, rng), tout, rng)

    model.train_log = fit(model, len(pairs), loss_fn, steps=steps or cfg.steps, batch=cfg.batch,
                          lr=cfg.lr, seed=seed + 1)
    return model


def predict_oov(model: OovModel, word: str, beam: int = 1) -> str:
    return model.predict(word, beam).pron


def read_pairs(text: str) -> list:
    """UTF-8 TSV of ``word<TAB>pron`` lines."""
    out = []
    for n, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {n}: expected word<TAB>pron")
        out.append((parts[0], parts[1]))
    return out
