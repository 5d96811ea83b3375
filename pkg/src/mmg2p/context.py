"""Five-token context models: a shared character encoder feeding a homograph decoder
or one of two ezafe classifiers.

Every word of a window is read by a character bi-GRU; the final forward and
backward states form its word vector (PAD words use a learned null vector).  A
second bi-GRU runs across the five word vectors, and its state at the middle
position is the cross-word vector.
"""

from __future__ import annotations

import collections
import logging
import random
from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .nn import ops
from .nn.checkpoint import register
from .nn.tensor import Tensor, default_dtype, no_grad
from .seq2seq import (Decoded, TrainLog, Vocab, decode_one, fit, greedy, pad_batch,
                      target_vocab, teacher_forcing)
from .text import CENTER, PAD, UNK, WINDOW, Alphabet, Window5, edit_distance

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContextConfig:
    char_emb: int = 32
    hidden: int = 64
    phon_emb: int = 32
    dec_hidden: int = 128
    attention: bool = True
    tied: bool = True
    max_word: int = 32
    max_tgt: int = 40
    lr: float = 2e-3
    batch: int = 64
    steps: int = 1200
    # training windows: every homograph middle plus this many others per homograph window
    other_ratio: float = 1.0


class NGramEncoder(nn.Module):
    def __init__(self, alphabet: Alphabet, cfg: ContextConfig, rng: np.random.Generator):
        self.vocab = Vocab(alphabet.graphemes, (PAD, UNK))
        self.hidden = cfg.hidden
        self.max_word = cfg.max_word
        self.emb = nn.Embedding(len(self.vocab), cfg.char_emb, rng)
        n_enc = 1 if cfg.tied else WINDOW
        self.words = [nn.BiGRU(cfg.char_emb, cfg.hidden, rng) for _ in range(n_enc)]
        self.null = nn.layers.param(rng.normal(0.0, 0.1, size=(1, 2 * cfg.hidden)))
        self.cross = nn.BiGRU(2 * cfg.hidden, cfg.hidden, rng)

    def _encode_words(self, words, encoder):
        for w in words:
            if len(w) > self.max_word:
                raise ValueError(f"word {w!r} longer than max_word={self.max_word}")
        ids = pad_batch([self.vocab.encode(w) for w in words])
        lengths = np.array([len(w) for w in words])
        states, h_f, h_b = encoder(self.emb(ids), lengths)
        return states, ops.concat([h_f, h_b], axis=-1), lengths

    def __call__(self, windows, keep_states: bool = False):
        """Returns (word vectors (B,5,2H), cross vectors (B,2H), middle-word states).

        Middle-word states are ``(states (B,T,2H), lengths)`` for attention, or None.
        """
        b = len(windows)
        index = np.zeros((b, WINDOW), dtype=np.int64)
        tables, offset = [], 0
        groups = [range(WINDOW)] if len(self.words) == 1 else [[p] for p in range(WINDOW)]
        middle = None
        for enc, positions in zip(self.words, groups):
            uniq = sorted({win.words[p] for win in windows for p in positions} - {PAD})
            if uniq:
                states, vecs, lengths = self._encode_words(uniq, enc)
                tables.append(vecs)
                where = {w: i for i, w in enumerate(uniq)}
                for i, win in enumerate(windows):
                    for p in positions:
                        if win.words[p] != PAD:
                            index[i, p] = offset + where[win.words[p]]
                if keep_states and CENTER in positions:
                    rows = np.array([where[win.target] for win in windows])
                    middle = (ops.getitem(states, rows), lengths[rows])
                offset += len(uniq)
        tables.append(self.null)
        null_row = offset
        for i, win in enumerate(windows):
            for p in range(WINDOW):
                if win.words[p] == PAD:
                    index[i, p] = null_row
        table = ops.concat(tables, axis=0)
        word_vecs = ops.embedding(table, index)
        cross_states, _, _ = self.cross(word_vecs)
        return word_vecs, cross_states[:, CENTER], middle


# homograph decoder -----------------------------------------------------------

class HomographHead(nn.Module):
    """GRU decoder fed the concatenated [middle word vector; cross-word vector]."""

    def __init__(self, n_tgt: int, cfg: ContextConfig, rng: np.random.Generator):
        ctx = 4 * cfg.hidden
        self.attention = cfg.attention
        self.emb = nn.Embedding(n_tgt, cfg.phon_emb, rng)
        self.init = nn.Linear(ctx, cfg.dec_hidden, rng)
        extra = 2 * cfg.hidden if cfg.attention else 0
        self.cell = nn.GRUCell(cfg.phon_emb + ctx + extra, cfg.dec_hidden, rng)
        if cfg.attention:
            self.query = nn.Linear(cfg.dec_hidden, 2 * cfg.hidden, rng)
        self.out = nn.Linear(cfg.dec_hidden + extra, n_tgt, rng)

    def start(self, info: Tensor) -> Tensor:
        return ops.tanh(self.init(info))

    def _attend(self, h, states, mask):
        q = ops.reshape(self.query(h), (h.shape[0], 1, -1))
        return ops.reshape(ops.attention(q, states, states, mask[:, None, :]), (h.shape[0], -1))

    def step(self, h, prev_ids, info, states=None, mask=None):
        """One decoder step; returns (logits, new hidden)."""
        parts = [self.emb(prev_ids), info]
        if self.attention:
            ctx = self._attend(h, states, mask)
            parts.append(ctx)
        h = self.cell(ops.concat(parts, axis=-1), h)
        feats = ops.concat([h, self._attend(h, states, mask)], axis=-1) if self.attention else h
        return self.out(feats), h


@register("homograph")
class HomographModel(nn.Module):
    def __init__(self, alphabet: Alphabet, cfg: ContextConfig = ContextConfig(), seed: int = 0):
        rng = np.random.default_rng(seed)
        self.alphabet = alphabet
        self.cfg = cfg
        self.seed = seed
        self.tgt_vocab = target_vocab(alphabet.phonemes)
        self.encoder = NGramEncoder(alphabet, cfg, rng)
        self.head = HomographHead(len(self.tgt_vocab), cfg, rng)
        self.train_log = TrainLog()

    @property
    def config(self) -> dict:
        return {"alphabet": self.alphabet.canonical(), "model": asdict(self.cfg), "seed": self.seed}

    @classmethod
    def from_config(cls, config: dict) -> "HomographModel":
        return cls(Alphabet.from_text(config["alphabet"]), ContextConfig(**config["model"]),
                   config["seed"])

    def _context(self, windows):
        word_vecs, cross, middle = self.encoder(windows, keep_states=self.cfg.attention)
        info = ops.concat([word_vecs[:, CENTER], cross], axis=-1)
        if middle is None:
            return info, None, None
        states, lengths = middle
        mask = np.arange(states.shape[1])[None, :] < lengths[:, None]
        return info, states, mask

    def loss(self, windows, targets) -> Tensor:
        info, states, mask = self._context(windows)
        tin, tout = teacher_forcing(targets, self.tgt_vocab)
        h = self.head.start(info)
        logits = []
        for t in range(tin.shape[1]):
            out, h = self.head.step(h, tin[:, t], info, states, mask)
            logits.append(out)
        return ops.cross_entropy(ops.stack(logits, axis=1), tout, 0)

    def stepper(self, windows):
        with no_grad():
            info, states, mask = self._context(windows)
            h0 = self.head.start(info)
        cache = {}

        def state(row, prefix):
            key = (row, tuple(prefix))
            if key not in cache:
                if len(prefix) == 1:
                    cache[key] = (None, h0.data[row:row + 1])
                else:
                    _, h_prev = state(row, prefix[:-1])
                    r = slice(row, row + 1)
                    logits, h = self.head.step(
                        Tensor(h_prev), np.array([prefix[-2]]), Tensor(info.data[r]),
                        None if states is None else Tensor(states.data[r]),
                        None if mask is None else mask[r])
                    cache[key] = (logits.data[0], h.data)
            return cache[key]

        def step(rows, prefixes):
            with no_grad():
                rows = [int(r) for r in rows]
                hs = np.concatenate([state(r, p)[1] for r, p in zip(rows, prefixes)])
                idx = np.array(rows)
                logits, _ = self.head.step(
                    Tensor(hs), np.array([p[-1] for p in prefixes]), Tensor(info.data[idx]),
                    None if states is None else Tensor(states.data[idx]),
                    None if mask is None else mask[idx])
                z = logits.data.astype(np.float64)
            return z - np.logaddexp.reduce(z, axis=-1, keepdims=True)

        return step

    def decode(self, windows, beam: int = 1) -> list:
        if not windows:
            return []
        if beam == 1:
            return greedy(self.stepper(windows), len(windows), self.tgt_vocab, self.cfg.max_tgt)
        return [decode_one(self.stepper([w]), self.tgt_vocab, self.cfg.max_tgt, beam)
                for w in windows]


def snap(decoded: str, allowed, seed=0) -> tuple:
    """Nearest allowed pronunciation by Levenshtein distance.

    Returns ``(pron, distance, tie_broken)``; equidistant candidates are chosen
    between by ``random.Random(seed)`` over the allowed set in sorted order.
    """
    allowed = sorted(set(allowed))
    if not allowed:
        raise ValueError("allowed pronunciation set is empty")
    if decoded in allowed:
        return decoded, 0, False
    dist = [edit_distance(decoded, a) for a in allowed]
    best = min(dist)
    ties = [a for a, d in zip(allowed, dist) if d == best]
    if len(ties) == 1:
        return ties[0], best, False
    return random.Random(seed).choice(ties), best, True


@dataclass
class HomographResult:
    pron: str
    raw: str
    distance: int
    tie_broken: bool
    truncated: bool


def predict_homograph(model: HomographModel, window: Window5, allowed, seed=0,
                      beam: int = 1) -> HomographResult:
    return predict_homographs(model, [window], [allowed], seed, beam)[0]


def predict_homographs(model: HomographModel, windows, allowed_sets, seed=0,
                       beam: int = 1) -> list:
    for a in allowed_sets:
        if not a:
            raise ValueError("allowed pronunciation set is empty")
    out = []
    for win, allowed, dec in zip(windows, allowed_sets, model.decode(list(windows), beam)):
        pron, dist, tie = snap(dec.pron, allowed, f"{seed}|{'|'.join(win.words)}")
        out.append(HomographResult(pron, dec.pron, dist, tie, dec.truncated))
    return out


def homograph_training_set(windows, targets, homographs, ratio: float, seed: int):
    """All windows whose middle is a homograph plus ``ratio`` times as many others."""
    homo = [i for i, w in enumerate(windows) if w.target in homographs]
    other = [i for i, w in enumerate(windows) if w.target not in homographs]
    rng = random.Random(seed)
    k = min(len(other), max(1, round(ratio * len(homo))) if homo else len(other))
    keep = sorted(homo + rng.sample(other, k))
    return [windows[i] for i in keep], [targets[i] for i in keep]


def train_homograph(windows, targets, homographs, alphabet: Alphabet,
                    cfg: ContextConfig = ContextConfig(), seed: int = 0,
                    steps: int | None = None) -> HomographModel:
    """Teacher-forced training on windows with gold (ezafe-free) middle-word prons."""
    if not windows:
        raise ValueError("empty training set")
    windows, targets = homograph_training_set(windows, targets, homographs, cfg.other_ratio, seed)
    for p in targets:
        alphabet.check_phonemes(p)
    with default_dtype(np.float32):
        model = HomographModel(alphabet, cfg, seed)

    def loss_fn(idx, rng):
        return model.loss([windows[i] for i in idx], [targets[i] for i in idx])

    model.train_log = fit(model, len(windows), loss_fn, steps=steps or cfg.steps,
                          batch=cfg.batch, lr=cfg.lr, seed=seed + 1)
    return model


# ezafe classifiers -------------------------------------------------------------

class _EzafeBase(nn.Module):
    def probs(self, windows) -> np.ndarray:
        with no_grad():
            z = self.logits(windows).data.astype(np.float64)
        z = z - z.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def predict(self, windows) -> list:
        if not windows:
            return []
        return [int(v) for v in np.argmax(self.probs(windows), axis=-1)]

    def loss(self, windows, labels) -> Tensor:
        return ops.cross_entropy(self.logits(windows), np.asarray(labels))

    @property
    def config(self) -> dict:
        return {"alphabet": self.alphabet.canonical(), "model": asdict(self.cfg), "seed": self.seed,
                **self._extra_config()}

    def _extra_config(self) -> dict:
        return {}


@register("ezafe-i")
class EzafeModelI(_EzafeBase):
    """Character level: a linear layer over the cross-word vector."""

    def __init__(self, alphabet: Alphabet, cfg: ContextConfig = ContextConfig(), seed: int = 0):
        rng = np.random.default_rng(seed)
        self.alphabet, self.cfg, self.seed = alphabet, cfg, seed
        self.encoder = NGramEncoder(alphabet, cfg, rng)
        self.out = nn.Linear(2 * cfg.hidden, 2, rng)
        self.train_log = TrainLog()

    @classmethod
    def from_config(cls, config: dict) -> "EzafeModelI":
        return cls(Alphabet.from_text(config["alphabet"]), ContextConfig(**config["model"]),
                   config["seed"])

    def logits(self, windows) -> Tensor:
        _, cross, _ = self.encoder(windows)
        return self.out(cross)


@register("ezafe-ii")
class EzafeModelII(_EzafeBase):
    """Word level: whole-word embeddings, a bi-GRU over the five tokens, a linear layer."""

    def __init__(self, alphabet: Alphabet, words, cfg: ContextConfig = ContextConfig(),
                 seed: int = 0):
        rng = np.random.default_rng(seed)
        self.alphabet, self.cfg, self.seed = alphabet, cfg, seed
        self.vocab = Vocab(words, (PAD, UNK))
        self.emb = nn.Embedding(len(self.vocab), cfg.char_emb * 2, rng)
        self.rnn = nn.BiGRU(cfg.char_emb * 2, cfg.hidden, rng)
        self.out = nn.Linear(2 * cfg.hidden, 2, rng)
        self.train_log = TrainLog()

    def _extra_config(self) -> dict:
        return {"words": self.vocab.itos[2:]}

    @classmethod
    def from_config(cls, config: dict) -> "EzafeModelII":
        return cls(Alphabet.from_text(config["alphabet"]), config["words"],
                   ContextConfig(**config["model"]), config["seed"])

    def logits(self, windows) -> Tensor:
        ids = np.array([[self.vocab.index(w) for w in win.words] for win in windows])
        states, _, _ = self.rnn(self.emb(ids))
        return self.out(states[:, CENTER])


def _check_labels(labels):
    if not labels:
        raise ValueError("empty training set")
    if len(set(labels)) < 2:
        log.warning("ezafe training labels are all %d; the classifier is degenerate", labels[0])


def train_ezafe_i(windows, labels, alphabet: Alphabet, cfg: ContextConfig = ContextConfig(),
                  seed: int = 0, steps: int | None = None) -> EzafeModelI:
    labels = [int(v) for v in labels]
    _check_labels(labels)
    with default_dtype(np.float32):
        model = EzafeModelI(alphabet, cfg, seed)
    windows = list(windows)
    model.train_log = fit(model, len(windows),
                          lambda idx, rng: model.loss([windows[i] for i in idx],
                                                      [labels[i] for i in idx]),
                          steps=steps or cfg.steps, batch=cfg.batch, lr=cfg.lr, seed=seed + 1)
    return model


def word_vocabulary(windows, min_count: int = 2) -> list:
    """Middle words seen at least ``min_count`` times, most frequent first."""
    counts = collections.Counter(w.target for w in windows)
    return sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))


def train_ezafe_ii(windows, labels, alphabet: Alphabet, cfg: ContextConfig = ContextConfig(),
                   seed: int = 0, steps: int | None = None, min_count: int = 2) -> EzafeModelII:
    labels = [int(v) for v in labels]
    _check_labels(labels)
    windows = list(windows)
    with default_dtype(np.float32):
        model = EzafeModelII(alphabet, word_vocabulary(windows, min_count), cfg, seed)
    model.train_log = fit(model, len(windows),
                          lambda idx, rng: model.loss([windows[i] for i in idx],
                                                      [labels[i] for i in idx]),
                          steps=steps or cfg.steps, batch=cfg.batch, lr=cfg.lr, seed=seed + 1)
    return model


def predict_ezafe(model, window: Window5) -> int:
    return model.predict([window])[0]


def read_windows(text: str) -> list:
    """Windows TSV: five token columns then the gold column."""
    out = []
    for n, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != WINDOW + 1:
            raise ValueError(f"line {n}: expected {WINDOW + 1} TAB-separated columns")
        out.append((Window5(tuple(parts[:WINDOW])), parts[WINDOW]))
    return out


def format_windows(rows) -> str:
    return "".join("\t".join(win.words) + "\t" + str(gold) + "\n" for win, gold in rows)
