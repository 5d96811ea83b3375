"""Word accuracy, ezafe accuracy, homograph accuracy and the homograph score.

The homograph score balances over pronunciations: for homograph ``j`` with
observed pronunciations ``P_1..P_n``::

    S_j = (1/n) * sum_i correct(P_i) / appearances(P_i)
    score = mean of S_j over homographs present in the test data

Pronunciations that never appear among the gold labels are left out of both the
sum and ``n`` (and listed in ``unseen`` on the report).
"""

from __future__ import annotations

import collections
import json
from dataclasses import dataclass, field


def _check_lengths(hyp, ref):
    if len(hyp) != len(ref):
        raise ValueError(f"length mismatch: {len(hyp)} hypotheses vs {len(ref)} references")


def word_accuracy(hyp, ref) -> float:
    """Exact-match rate; nested sequences (sentences of words) are flattened."""
    hyp, ref = list(hyp), list(ref)
    _check_lengths(hyp, ref)
    flat_h, flat_r = [], []
    for h, r in zip(hyp, ref):
        if isinstance(h, (list, tuple)):
            _check_lengths(h, r)
            flat_h.extend(h)
            flat_r.extend(r)
        else:
            flat_h.append(h)
            flat_r.append(r)
    if not flat_r:
        return 0.0
    return sum(h == r for h, r in zip(flat_h, flat_r)) / len(flat_r)


@dataclass
class EzafeReport:
    accuracy: float
    confusion: dict  # (gold, hyp) -> count
    total: int

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "total": self.total,
                "confusion": {f"{g}{h}": c for (g, h), c in sorted(self.confusion.items())}}


def ezafe_accuracy(hyp, ref) -> EzafeReport:
    hyp, ref = [int(v) for v in hyp], [int(v) for v in ref]
    _check_lengths(hyp, ref)
    conf = collections.Counter(zip(ref, hyp))
    confusion = {(g, h): conf.get((g, h), 0) for g in (0, 1) for h in (0, 1)}
    acc = (confusion[0, 0] + confusion[1, 1]) / len(ref) if ref else 0.0
    return EzafeReport(acc, confusion, len(ref))


@dataclass
class PronTally:
    pron: str
    appearances: int
    correct: int


@dataclass
class HomographStat:
    homograph: str
    prons: list
    unseen: list

    @property
    def n(self) -> int:
        return len(self.prons)

    @property
    def score(self) -> float:
        return sum(p.correct / p.appearances for p in self.prons) / self.n

    @property
    def accuracy(self) -> float:
        return sum(p.correct for p in self.prons) / sum(p.appearances for p in self.prons)


@dataclass
class HomographEvalReport:
    per_homograph: dict = field(default_factory=dict)

    @property
    def C(self) -> int:
        return len(self.per_homograph)

    @property
    def score(self) -> float:
        if not self.per_homograph:
            return 0.0
        return sum(s.score for s in self.per_homograph.values()) / self.C

    @property
    def accuracy(self) -> float:
        """Plain per-sample accuracy over all homograph occurrences."""
        total = sum(p.appearances for s in self.per_homograph.values() for p in s.prons)
        right = sum(p.correct for s in self.per_homograph.values() for p in s.prons)
        return right / total if total else 0.0

    def to_jsonl(self) -> str:
        lines = []
        for h, s in sorted(self.per_homograph.items()):
            lines.append({"homograph": h, "n": s.n, "S": s.score, "unseen": s.unseen,
                          "prons": [{"pron": p.pron, "appearances": p.appearances,
                                     "correct": p.correct} for p in s.prons]})
        lines.append({"summary": True, "C": self.C, "score": self.score,
                      "accuracy": self.accuracy})
        return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in lines)


def homograph_score(samples, inventory: dict) -> HomographEvalReport:
    """``samples``: (homograph, gold pron, hyp pron); ``inventory``: homograph -> prons.

    A hypothesis outside the inventory is simply wrong.
    """
    appear = collections.defaultdict(collections.Counter)
    correct = collections.defaultdict(collections.Counter)
    for h, gold, hyp in samples:
        if h not in inventory:
            raise ValueError(f"{h!r} has no pronunciation inventory")
        if gold not in inventory[h]:
            raise ValueError(f"gold pronunciation {gold!r} of {h!r} is outside its inventory")
        appear[h][gold] += 1
        if hyp == gold:
            correct[h][gold] += 1
    report = HomographEvalReport()
    for h in sorted(appear):
        prons = [PronTally(p, appear[h][p], correct[h][p]) for p in inventory[h] if appear[h][p]]
        unseen = [p for p in inventory[h] if not appear[h][p]]
        report.per_homograph[h] = HomographStat(h, prons, unseen)
    return report


# evaluation rows ---------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    sentence: int
    index: int
    route: str
    gold: str
    hyp: str
    gold_ezafe: int
    hyp_ezafe: int


def format_eval_rows(rows) -> str:
    return "".join(f"{r.sentence}\t{r.index}\t{r.route}\t{r.gold}\t{r.hyp}\t{r.gold_ezafe}\t"
                   f"{r.hyp_ezafe}\n" for r in rows)


def parse_eval_rows(text: str) -> list:
    out = []
    for n, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 7:
            raise ValueError(f"line {n}: expected 7 TAB-separated columns")
        s, i, route, gold, hyp, ge, he = parts
        out.append(EvalRow(int(s), int(i), route, gold, hyp, int(ge), int(he)))
    return out
