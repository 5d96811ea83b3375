"""Shared sequence-to-sequence machinery: vocabularies, decoders, search and training."""

from __future__ import annotations

import contextlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .nn import ops
from .nn.tensor import Tensor, no_grad
from .text import BOS, EOS, PAD, UNK

log = logging.getLogger(__name__)


class Vocab:
    """Symbol table with the special symbols first (PAD is always index 0)."""

    def __init__(self, symbols, specials=(PAD,)):
        self.itos = list(specials) + [s for s in symbols if s not in specials]
        self.stoi = {s: i for i, s in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate vocabulary symbol")

    def __len__(self) -> int:
        return len(self.itos)

    def index(self, sym: str) -> int:
        i = self.stoi.get(sym)
        if i is None:
            i = self.stoi.get(UNK)
            if i is None:
                raise KeyError(f"symbol {sym!r} not in vocabulary")
        return i

    def encode(self, seq) -> list:
        return [self.index(s) for s in seq]

    def decode(self, ids) -> str:
        return "".join(self.itos[i] for i in ids)


def pad_batch(seqs, pad: int = 0, length: int | None = None) -> np.ndarray:
    n = max((len(s) for s in seqs), default=0) if length is None else length
    out = np.full((len(seqs), max(n, 1)), pad, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = s
    return out


def target_vocab(phonemes) -> Vocab:
    return Vocab(phonemes, (PAD, BOS, EOS))


@dataclass
class Decoded:
    pron: str
    score: float
    truncated: bool = False


# search --------------------------------------------------------------------

def _emittable(logp: np.ndarray, bos: int) -> np.ndarray:
    """PAD and BOS are never produced by a decoder."""
    logp = np.array(logp, dtype=np.float64)
    logp[..., 0] = -np.inf
    logp[..., bos] = -np.inf
    return logp


def greedy(step_fn, batch: int, tvocab: Vocab, max_len: int) -> list:
    """Batched greedy decode.

    ``step_fn(rows, prefixes)`` returns log-probs (len(rows), V) for the next symbol
    of each prefix, where ``rows`` index the source batch.
    """
    bos, eos = tvocab.index(BOS), tvocab.index(EOS)
    prefixes = [[bos] for _ in range(batch)]
    scores = np.zeros(batch)
    done = np.zeros(batch, dtype=bool)
    truncated = np.zeros(batch, dtype=bool)
    for t in range(max_len + 1):
        live = np.flatnonzero(~done)
        if not live.size:
            break
        logp = _emittable(step_fn(live, [prefixes[i] for i in live]), bos)
        for row, i in enumerate(live):
            lp = logp[row]
            if t == max_len:
                # out of room: close the hypothesis with EOS
                nxt = eos
                truncated[i] = int(np.argmax(lp)) != eos
            else:
                nxt = int(np.argmax(lp))
            scores[i] += float(lp[nxt])
            prefixes[i].append(nxt)
            if nxt == eos:
                done[i] = True
    out = []
    for i in range(batch):
        ids = [k for k in prefixes[i][1:] if k != eos]
        out.append(Decoded(tvocab.decode(ids), float(scores[i]), bool(truncated[i])))
    return out


def beam_search(step_fn, tvocab: Vocab, max_len: int, width: int) -> Decoded:
    """Beam search over one input; finished hypotheses are kept until none alive can win."""
    bos, eos = tvocab.index(BOS), tvocab.index(EOS)
    alive = [([bos], 0.0)]
    finished = []
    for t in range(max_len + 1):
        logp = _emittable(step_fn(np.zeros(len(alive), dtype=np.int64), [p for p, _ in alive]), bos)
        cands = []
        for (prefix, score), lp in zip(alive, logp):
            if t == max_len:
                cands.append((prefix + [eos], score + float(lp[eos]),
                              int(np.argmax(lp)) != eos))
                continue
            top = np.argsort(-lp, kind="stable")[:width]
            for k in top:
                cands.append((prefix + [int(k)], score + float(lp[k]), False))
        cands.sort(key=lambda c: -c[1])
        alive = []
        for prefix, score, trunc in cands:
            if prefix[-1] == eos:
                finished.append((prefix, score, trunc))
            elif len(alive) < width:
                alive.append((prefix, score))
        best = max((s for _, s, _ in finished), default=-math.inf)
        # log-probs only shrink, so an alive prefix below the best finished one cannot win
        alive = [(p, s) for p, s in alive if s > best]
        if not alive:
            break
    prefix, score, trunc = max(finished, key=lambda c: c[1])
    return Decoded(tvocab.decode(k for k in prefix[1:] if k != eos), score, trunc)


def decode_one(step_fn, tvocab: Vocab, max_len: int, beam: int) -> Decoded:
    """Greedy for ``beam == 1``; otherwise the best of beam widths 1..beam.

    Plain beam search is not monotone in its width, so taking the best over all
    narrower widths guarantees a wider beam never returns a worse score.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    best = greedy(step_fn, 1, tvocab, max_len)[0]
    for w in range(2, beam + 1):
        cand = beam_search(step_fn, tvocab, max_len, w)
        if cand.score > best.score:
            best = cand
    return best


# transformer encoder-decoder ------------------------------------------------

class TransformerSeq2Seq(nn.Module):
    def __init__(self, n_src: int, n_tgt: int, dim: int, heads: int, ff: int, layers: int,
                 dropout: float, max_len: int, rng: np.random.Generator):
        self.src_emb = nn.Embedding(n_src, dim, rng)
        self.tgt_emb = nn.Embedding(n_tgt, dim, rng)
        self.encoder = [nn.TransformerBlock(dim, heads, ff, rng, dropout) for _ in range(layers)]
        self.decoder = [nn.TransformerBlock(dim, heads, ff, rng, dropout, cross=True)
                        for _ in range(layers)]
        self.out = nn.Linear(dim, n_tgt, rng)
        self.dim = dim
        self.positions = nn.sinusoidal_positions(max_len + 2, dim)

    def _embed(self, emb, ids):
        x = ops.mul(emb(ids), math.sqrt(self.dim))
        return ops.add(x, self.positions[:ids.shape[1]])

    def encode(self, src: np.ndarray, rng=None):
        mask = src != 0
        x = self._embed(self.src_emb, src)
        for block in self.encoder:
            x = block(x, mask=mask, rng=rng)
        return x, mask

    def decoder_logits(self, memory, mem_mask, tgt_in: np.ndarray, rng=None) -> Tensor:
        y = self._embed(self.tgt_emb, tgt_in)
        mask = tgt_in != 0
        for block in self.decoder:
            y = block(y, mask=mask, causal=True, memory=memory, memory_mask=mem_mask, rng=rng)
        return self.out(y)

    def loss(self, src, tgt_in, tgt_out, rng=None) -> Tensor:
        memory, mem_mask = self.encode(src, rng)
        logits = self.decoder_logits(memory, mem_mask, tgt_in, rng)
        return ops.cross_entropy(logits, tgt_out, 0)

    def stepper(self, src: np.ndarray):
        """Return the ``step_fn(rows, prefixes)`` used by :func:`greedy` / :func:`beam_search`."""
        with no_grad():
            memory, mem_mask = self.encode(src)

        def step(rows, prefixes):
            with no_grad():
                n = len(prefixes)
                rows = np.asarray(rows)
                mem, mm = Tensor(memory.data[rows]), mem_mask[rows]
                tgt = pad_batch(prefixes)
                logits = self.decoder_logits(mem, mm, tgt).data
                last = np.array([len(p) - 1 for p in prefixes])
                z = logits[np.arange(n), last].astype(np.float64)
            return z - np.logaddexp.reduce(z, axis=-1, keepdims=True)

        return step


def teacher_forcing(targets, tvocab: Vocab):
    """(decoder input, decoder output) id matrices: BOS+y and y+EOS."""
    bos, eos = tvocab.index(BOS), tvocab.index(EOS)
    ins = [[bos] + tvocab.encode(t) for t in targets]
    outs = [tvocab.encode(t) + [eos] for t in targets]
    return pad_batch(ins), pad_batch(outs)


def blank_inputs(tin: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Replace decoder inputs after BOS by PAD with probability ``p``.

    A blanked position is hidden from decoder self-attention, so the model has
    to lean on the source rather than on the target prefix.
    """
    if p <= 0:
        return tin
    drop = rng.random(tin.shape) < p
    drop[:, 0] = False
    return np.where(drop, 0, tin)


# training ------------------------------------------------------------------

@dataclass
class TrainLog:
    losses: list = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


@contextlib.contextmanager
def single_thread():
    """Pin BLAS to one thread so float reductions happen in a fixed order."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        yield
        return
    with threadpool_limits(limits=1):
        yield


def fit(model: nn.Module, n_examples: int, loss_fn, *, steps: int, batch: int, lr: float,
        seed: int, clip: float = 5.0, log_every: int = 100) -> TrainLog:
    """Generic minibatch loop.  ``loss_fn(indices, rng) -> scalar Tensor``.

    Batches are drawn by walking seeded permutations of ``range(n_examples)``.
    """
    if n_examples == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    opt = nn.Adam(model.parameters(), nn.AdamHyper(lr=lr), clip_norm=clip)
    out = TrainLog()
    model.train()
    order, pos = rng.permutation(n_examples), 0
    running = []
    with single_thread():
        for step in range(steps):
            if pos >= n_examples:
                order, pos = rng.permutation(n_examples), 0
            idx = order[pos:pos + batch]
            pos += batch
            opt.zero_grad()
            loss = loss_fn(idx, rng)
            loss.backward()
            opt.step()
            running.append(loss.item())
            if (step + 1) % log_every == 0 or step + 1 == steps:
                out.losses.append(float(np.mean(running)))
                running = []
                log.debug("step %d loss %.4f", step + 1, out.losses[-1])
    model.eval()
    return out
