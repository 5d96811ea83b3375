"""The multi-module converter: dictionary, homograph model and OOV model for the
base pronunciation, an ezafe classifier for every word, then suffixing."""

from __future__ import annotations

import collections
import logging
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .context import predict_homographs
from .lexicon import Dictionaries
from .nn.checkpoint import fingerprint
from .text import Alphabet, make_windows, normalize, tokenize

log = logging.getLogger(__name__)

ROUTES = ("dict", "homograph", "oov")


def apply_ezafe(pron: str, flag: int, alphabet: Alphabet) -> str:
    if not flag:
        return pron
    return pron + alphabet.ezafe_suffix(pron)


class OovLog:
    """Thread-safe tally of words sent to the OOV model, flushed as TSV."""

    def __init__(self, path=None):
        self.path = None if path is None else Path(path)
        self._lock = threading.Lock()
        self._pending = {}

    def record(self, word: str, pron: str):
        with self._lock:
            old = self._pending.get(word)
            self._pending[word] = (pron, 1 if old is None else old[1] + 1)

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self._pending)

    def flush(self, path=None) -> int:
        """Merge pending records into the TSV (word, pron, count); returns records written.

        The file is rewritten through a temporary file and an atomic rename, so a
        failed write leaves the previous contents intact.
        """
        target = Path(path) if path is not None else self.path
        if target is None:
            raise ValueError("OOV log has no sink path")
        with self._lock:
            if not self._pending:
                return 0
            merged = {}
            if target.exists():
                for line in target.read_text(encoding="utf-8").splitlines():
                    if line:
                        w, p, c = line.split("\t")
                        merged[w] = (p, int(c))
            for w, (p, c) in self._pending.items():
                old = merged.get(w)
                merged[w] = (p, c + (old[1] if old else 0))
            text = "".join(f"{w}\t{p}\t{c}\n" for w, (p, c) in merged.items())
            fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=".oovlog")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(text)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            n = len(self._pending)
            self._pending = {}
            return n


@dataclass(frozen=True)
class Flags:
    skip_list: bool = True
    beam: int = 1
    seed: int = 0
    parallel: bool = False


@dataclass
class WordResult:
    token: str
    pron: str
    route: str
    ezafe: int
    meta: dict = field(default_factory=dict)

    @property
    def base(self) -> str:
        """Pronunciation before the ezafe suffix."""
        return self.meta.get("base", self.pron)


class G2pSystem:
    def __init__(self, alphabet: Alphabet, dicts: Dictionaries, oov_model, homograph_model,
                 ezafe_model, flags: Flags = Flags(), oov_log: OovLog | None = None,
                 table: dict | None = None):
        overlap = dicts.homographs.keys() & dicts.pron.keys()
        if overlap:
            raise ValueError(f"homograph dictionary keys also in the pronunciation dictionary: "
                             f"{sorted(overlap)[:5]}")
        want = fingerprint(alphabet)
        for name, model in (("oov", oov_model), ("homograph", homograph_model),
                            ("ezafe", ezafe_model)):
            if model is None:
                raise ValueError(f"{name} model missing")
            if fingerprint(getattr(model, "alphabet", None)) != want:
                raise ValueError(f"{name} model was trained under a different alphabet")
        self.alphabet = alphabet
        self.dicts = dicts
        self.oov_model = oov_model
        self.homograph_model = homograph_model
        self.ezafe_model = ezafe_model
        self.flags = flags
        self.oov_log = oov_log or OovLog()
        self.table = table
        self._calls = collections.Counter()
        self._calls_lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=3) if flags.parallel else None

    @property
    def ezafe_calls(self) -> int:
        """Number of windows sent to the ezafe model so far."""
        return self._calls["ezafe"]

    def _count(self, key, n):
        with self._calls_lock:
            self._calls[key] += n

    def route(self, word: str) -> str:
        if word in self.dicts.homographs:
            return "homograph"
        if word in self.dicts.pron:
            return "dict"
        return "oov"

    # the three module calls; each is a pure function of its inputs
    def _ezafe(self, windows) -> list:
        self._count("ezafe", len(windows))
        return self.ezafe_model.predict(windows)

    def _homographs(self, windows):
        self._count("homograph", len(windows))
        allowed = [self.dicts.homographs[w.target] for w in windows]
        return predict_homographs(self.homograph_model, windows, allowed, self.flags.seed,
                                  self.flags.beam)

    def _oov(self, words) -> dict:
        self._count("oov", len(words))
        return {w: self.oov_model.predict(w, self.flags.beam) for w in words}

    def convert_words(self, words, parallel: bool | None = None) -> list:
        """Convert an already tokenised sentence of words (no punctuation)."""
        words = list(words)
        windows = make_windows(words)
        routes = [self.route(w) for w in words]
        skip = self.dicts.gen_skiplist if self.flags.skip_list else frozenset()
        ez_idx = [i for i, w in enumerate(words) if w not in skip]
        hg_idx = [i for i, r in enumerate(routes) if r == "homograph"]
        oov_words = sorted({w for w, r in zip(words, routes) if r == "oov"})
        jobs = (
            (self._ezafe, [windows[i] for i in ez_idx]),
            (self._homographs, [windows[i] for i in hg_idx]),
            (self._oov, oov_words),
        )
        use_pool = self.flags.parallel if parallel is None else parallel
        if use_pool:
            pool = self._pool or ThreadPoolExecutor(max_workers=3)
            futures = [pool.submit(fn, arg) if arg else None for fn, arg in jobs]
            results = [f.result() if f is not None else None for f in futures]
            if pool is not self._pool:
                pool.shutdown()
        else:
            results = [fn(arg) if arg else None for fn, arg in jobs]
        ez_out, hg_out, oov_out = results
        ezafe = [0] * len(words)
        for i, v in zip(ez_idx, ez_out or []):
            ezafe[i] = v
        hg = dict(zip(hg_idx, hg_out or []))
        out = []
        for i, (w, r) in enumerate(zip(words, routes)):
            meta = {}
            if r == "homograph":
                res = hg[i]
                base = res.pron
                meta.update(raw=res.raw, snap_distance=res.distance, tie_break=res.tie_broken,
                            truncated=res.truncated)
            elif r == "dict":
                base = self.dicts.pron[w]
            else:
                dec = oov_out[w]
                base = dec.pron
                meta["truncated"] = dec.truncated
                self.oov_log.record(w, base)
            flag = ezafe[i] if base else 0
            meta["base"] = base
            out.append(WordResult(w, apply_ezafe(base, flag, self.alphabet), r, flag, meta))
        return out

    def convert_tokens(self, tokens, parallel: bool | None = None) -> list:
        words = [t.text for t in tokens if not t.is_punct]
        results = iter(self.convert_words(words, parallel) if words else [])
        return [WordResult(t.text, "", "punct", 0) if t.is_punct else next(results)
                for t in tokens]

    def convert(self, raw: str, parallel: bool | None = None) -> list:
        """Normalise, tokenise and convert one sentence; punctuation keeps an empty pron."""
        return self.convert_tokens(tokenize(normalize(raw, self.alphabet, self.table)), parallel)

    def flush_oov_log(self, path=None) -> int:
        return self.oov_log.flush(path)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def convert(system: G2pSystem, raw: str) -> list:
    return system.convert(raw)


def flush_oov_log(system: G2pSystem, path=None) -> int:
    return system.flush_oov_log(path)
