"""Data preparation, per-module training and evaluation shared by the CLI and tests."""

from __future__ import annotations

import collections
import dataclasses
import logging
from dataclasses import dataclass

from . import context, e2e, oov
from .lexicon import (Dictionaries, build_dicts, derive_ezafe_labels, pron_frequencies,
                      split_corpus)
from .metrics import EvalRow, ezafe_accuracy, homograph_score, word_accuracy
from .pipeline import Flags, G2pSystem
from .text import Alphabet, make_windows

log = logging.getLogger(__name__)

MODULES = ("oov", "homograph", "ezafe-i", "ezafe-ii", "e2e-transformer", "e2e-gru")


@dataclass
class Prepared:
    alphabet: Alphabet
    entries: list
    train: list
    val: list
    test: list
    labels: list            # EzafeLabel per training token
    dicts: Dictionaries
    freq: dict

    @property
    def windows(self) -> list:
        return [lab.window for lab in self.labels]

    @property
    def bases(self) -> list:
        return [lab.base for lab in self.labels]

    @property
    def ezafe(self) -> list:
        return [lab.label for lab in self.labels]

    @property
    def realised(self) -> list:
        return [lab.pron for lab in self.labels]


def prepare(corpus, entries, alphabet: Alphabet, exceptions=frozenset(), seed: int = 0) -> Prepared:
    """Split the corpus, derive ezafe labels on the training part and build the dictionaries.

    Pronunciation frequencies for multi-pronunciation words come from the
    training split only.
    """
    train, val, test = split_corpus(corpus, seed)
    labeling = derive_ezafe_labels(train, entries, alphabet)
    freq = pron_frequencies(labeling)
    dicts = build_dicts(entries, freq, exceptions)
    return Prepared(alphabet, list(entries), train, val, test, labeling.labels, dicts, freq)


def _override(cfg, overrides: dict):
    if not overrides:
        return cfg
    kinds = {f.name: f.type for f in dataclasses.fields(cfg)}
    vals = {}
    for k, v in overrides.items():
        if k not in kinds:
            raise KeyError(f"unknown hyperparameter {k!r} for {type(cfg).__name__}")
        t = kinds[k]
        if t == "bool":
            vals[k] = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "on", "yes")
        elif t == "float":
            vals[k] = float(v)
        else:
            vals[k] = int(v)
    return dataclasses.replace(cfg, **vals)


def default_config(module: str):
    if module == "oov":
        return oov.OovConfig()
    if module in ("homograph", "ezafe-i", "ezafe-ii"):
        return context.ContextConfig()
    if module == "e2e-transformer":
        return e2e.E2eConfig()
    if module == "e2e-gru":
        return context.ContextConfig(attention=True, other_ratio=0.0)
    raise KeyError(f"unknown module {module!r}")


def train_module(module: str, data: Prepared, seed: int, overrides: dict | None = None):
    """Train one module on the prepared training split."""
    cfg = _override(default_config(module), overrides or {})
    a = data.alphabet
    if module == "oov":
        # every corpus occurrence, homographs included, with the ezafe suffix removed
        pairs = [(lab.window.target, lab.base) for lab in data.labels]
        return oov.train_oov(pairs, a, cfg, seed)
    if module == "homograph":
        return context.train_homograph(data.windows, data.bases, data.dicts.homographs, a, cfg,
                                       seed)
    if module == "ezafe-i":
        return context.train_ezafe_i(data.windows, data.ezafe, a, cfg, seed)
    if module == "ezafe-ii":
        return context.train_ezafe_ii(data.windows, data.ezafe, a, cfg, seed)
    if module == "e2e-transformer":
        return e2e.train_e2e(data.windows, data.realised, a, "transformer", cfg, seed)
    if module == "e2e-gru":
        return e2e.train_e2e(data.windows, data.realised, a, "gru_attention", cfg, seed)
    raise KeyError(f"unknown module {module!r}")


def build_system(data: Prepared, oov_model, homograph_model, ezafe_model,
                 flags: Flags = Flags(), oov_log=None) -> G2pSystem:
    return G2pSystem(data.alphabet, data.dicts, oov_model, homograph_model, ezafe_model, flags,
                     oov_log)


# evaluation ----------------------------------------------------------------------

def gold_labels(samples, entries, alphabet: Alphabet) -> list:
    """Per-sentence :class:`EzafeLabel` lists (gold flag and ezafe-free base)."""
    labeling = derive_ezafe_labels(samples, entries, alphabet)
    return labeling.by_sentence(samples)


def evaluate_system(system: G2pSystem, samples, labels) -> tuple:
    """Run the pipeline over ``samples``; returns (summary dict, homograph report, rows).

    Homographs are scored on the pronunciation before the ezafe suffix.
    """
    rows, hsamples = [], []
    homographs = system.dicts.homographs
    for si, (s, sent) in enumerate(zip(samples, labels)):
        results = system.convert_words(s.graphemes)
        for wi, (res, gold, lab) in enumerate(zip(results, s.phonemes, sent)):
            rows.append(EvalRow(si, wi, res.route, gold, res.pron, lab.label, res.ezafe))
            if res.token in homographs:
                hsamples.append((res.token, lab.base, res.base))
    report = homograph_score(hsamples, homographs)
    ez = ezafe_accuracy([r.hyp_ezafe for r in rows], [r.gold_ezafe for r in rows])
    summary = {
        "summary": True,
        "words": len(rows),
        "word_accuracy": word_accuracy([r.hyp for r in rows], [r.gold for r in rows]),
        "ezafe": ez.to_dict(),
        "homograph_accuracy": report.accuracy,
        "homograph_score": report.score,
        "homographs_in_test": report.C,
        "routes": dict(sorted(collections.Counter(r.route for r in rows).items())),
    }
    return summary, report, rows


def e2e_accuracy(model, samples, batch: int = 256) -> float:
    """Middle-word exact match of an end-to-end model over every token of ``samples``."""
    windows, gold = [], []
    for s in samples:
        windows.extend(make_windows(s.graphemes))
        gold.extend(s.phonemes)
    hyp = []
    for i in range(0, len(windows), batch):
        hyp.extend(d.pron for d in model.decode(windows[i:i + batch]))
    return word_accuracy(hyp, gold)
