"""Lexicon and corpus files, the derived dictionaries, and ezafe gold labels.

Lexicon lines look like::

    نفتالین<TAB>(N1,n/ftalin)(N1GEN,n/ftaline)

A tag ending in ``GEN`` marks the ezafe form of the pronunciation.
"""

from __future__ import annotations

import collections
import logging
import random
from dataclasses import dataclass
from typing import NamedTuple

from .text import Alphabet, Window5, make_windows

log = logging.getLogger(__name__)


class LexiconParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Variant:
    tag: str
    pron: str

    @property
    def is_gen(self) -> bool:
        return self.tag.endswith("GEN")


@dataclass(frozen=True)
class LexiconEntry:
    headword: str
    variants: tuple

    def prons(self, gen: bool = False) -> list:
        """Distinct pronunciations in listed order, GEN or non-GEN."""
        seen = []
        for v in self.variants:
            if v.is_gen == gen and v.pron not in seen:
                seen.append(v.pron)
        return seen


def _parse_line(line: str, lineno: int) -> LexiconEntry:
    head, sep, rest = line.partition("\t")
    if not sep:
        raise LexiconParseError("missing TAB after headword", lineno, len(line) + 1)
    if not head:
        raise LexiconParseError("empty headword", lineno, 1)
    pos = len(head) + 1
    variants = []
    while pos < len(line):
        col = pos + 1
        if line[pos] != "(":
            raise LexiconParseError(f"expected '(' but found {line[pos]!r}", lineno, col)
        close = line.find(")", pos)
        if close < 0:
            raise LexiconParseError("unclosed group", lineno, col)
        body = line[pos + 1:close]
        if "(" in body:
            raise LexiconParseError("unclosed group", lineno, col)
        tag, comma, pron = body.partition(",")
        if not comma:
            raise LexiconParseError("group lacks ',' between tag and pronunciation", lineno, col)
        if not tag:
            raise LexiconParseError("empty tag", lineno, col + 1)
        if not pron or "," in pron:
            raise LexiconParseError("bad pronunciation field", lineno, col + len(tag) + 2)
        variants.append(Variant(tag, pron))
        pos = close + 1
    if not variants:
        raise LexiconParseError("entry has no pronunciation groups", lineno, len(head) + 2)
    return LexiconEntry(head, tuple(variants))


def parse_lexicon(text: str) -> list:
    """Parse lexicon text; raises :class:`LexiconParseError` with 1-based line/column."""
    return [_parse_line(line, n) for n, line in enumerate(text.split("\n"), 1) if line]


def serialize_lexicon(entries) -> str:
    return "".join(
        e.headword + "\t" + "".join(f"({v.tag},{v.pron})" for v in e.variants) + "\n"
        for e in entries
    )


def lexicon_warnings(entries, alphabet: Alphabet) -> list:
    """Non-fatal problems: unknown phonemes, GEN forms that do not extend their base."""
    out = []
    for e in entries:
        by_tag = {v.tag: v.pron for v in e.variants if not v.is_gen}
        for v in e.variants:
            if not alphabet.is_phonemes(v.pron):
                out.append(f"{e.headword}: {v.pron!r} has symbols outside the phoneme set")
            if v.is_gen and v.tag[:-3] in by_tag:
                base = by_tag[v.tag[:-3]]
                if v.pron not in (base + "e", base + "ye"):
                    out.append(f"{e.headword}: GEN form {v.pron!r} does not extend {base!r}")
    return out


class Dictionaries(NamedTuple):
    pron: dict
    homographs: dict
    gen_skiplist: frozenset


def build_dicts(entries, freq=None, exceptions=frozenset()) -> Dictionaries:
    """Split the lexicon into the pronunciation dictionary and the homograph dictionary.

    ``freq`` maps ``(headword, pron)`` to a count and picks the most common
    pronunciation of excepted multi-pronunciation words (ties and missing counts
    fall back to listing order).  Words with no GEN variant form the skip list.
    """
    freq = freq or {}
    pron, homographs, skip = {}, {}, set()
    for e in entries:
        base = e.prons(gen=False)
        if not any(v.is_gen for v in e.variants):
            skip.add(e.headword)
        if len(base) >= 2 and e.headword not in exceptions:
            homographs[e.headword] = tuple(base)
            continue
        candidates = base or e.prons(gen=True)
        best = max(range(len(candidates)),
                   key=lambda i: (freq.get((e.headword, candidates[i]), 0), -i))
        pron[e.headword] = candidates[best]
    return Dictionaries(pron, homographs, frozenset(skip))


# corpus -------------------------------------------------------------------

@dataclass(frozen=True)
class CorpusSample:
    graphemes: tuple
    phonemes: tuple

    def __post_init__(self):
        if len(self.graphemes) != len(self.phonemes):
            raise CorpusError(f"{len(self.graphemes)} tokens but {len(self.phonemes)} pronunciations")


def parse_corpus(text: str) -> list:
    samples = []
    for n, line in enumerate(text.split("\n"), 1):
        if not line:
            continue
        left, sep, right = line.partition("\t")
        if not sep:
            raise CorpusError(f"line {n}: missing TAB")
        try:
            samples.append(CorpusSample(tuple(left.split(" ")), tuple(right.split(" "))))
        except CorpusError as exc:
            raise CorpusError(f"line {n}: {exc}") from None
    return samples


def format_corpus(samples) -> str:
    return "".join(" ".join(s.graphemes) + "\t" + " ".join(s.phonemes) + "\n" for s in samples)


def parse_word_list(text: str) -> frozenset:
    return frozenset(line.split("\t")[0] for line in text.split("\n") if line and not line.startswith("#"))


def parse_freq(text: str) -> dict:
    out = {}
    for line in text.split("\n"):
        if line and not line.startswith("#"):
            word, pron, count = line.split("\t")
            out[(word, pron)] = int(count)
    return out


def format_freq(freq: dict) -> str:
    return "".join(f"{w}\t{p}\t{c}\n" for (w, p), c in sorted(freq.items()))


# ezafe labels -------------------------------------------------------------

def ezafe_bases(pron: str, alphabet: Alphabet) -> list:
    """Every base that ``pron`` could be the ezafe form of."""
    out = []
    if len(pron) > 2 and pron.endswith("ye") and alphabet.is_vowel(pron[-3]):
        out.append(pron[:-2])
    if len(pron) > 1 and pron.endswith("e") and not alphabet.is_vowel(pron[-2]):
        out.append(pron[:-1])
    return out


@dataclass(frozen=True)
class EzafeLabel:
    window: Window5
    label: int
    pron: str
    base: str


@dataclass
class EzafeLabeling:
    labels: list
    underivable: collections.Counter

    @property
    def underivable_count(self) -> int:
        return sum(self.underivable.values())

    def by_sentence(self, corpus) -> list:
        out, i = [], 0
        for s in corpus:
            out.append(self.labels[i:i + len(s.graphemes)])
            i += len(s.graphemes)
        return out


def derive_ezafe_labels(corpus, entries, alphabet: Alphabet) -> EzafeLabeling:
    """Label every corpus word 1 if its gold pronunciation carries ezafe.

    Listed words compare against the lexicon's GEN / non-GEN variants.  For an
    unlisted word the candidate bases are the pronunciations observed for the same
    grapheme in ``corpus``.  The grapheme is always part of the key.
    """
    lex = {e.headword: e for e in entries}
    observed = collections.defaultdict(set)
    for s in corpus:
        for g, p in zip(s.graphemes, s.phonemes):
            if g not in lex:
                observed[g].add(p)
    labels, bad = [], collections.Counter()
    for s in corpus:
        for window, pron in zip(make_windows(s.graphemes), s.phonemes):
            word = window.target
            bases = ezafe_bases(pron, alphabet)
            entry = lex.get(word)
            label, base = 0, pron
            if entry is not None:
                plain = entry.prons(gen=False)
                if pron in plain:
                    pass
                elif pron in entry.prons(gen=True) or any(b in plain for b in bases):
                    label = 1
                    base = next((b for b in bases if b in plain), bases[0] if bases else pron)
                else:
                    bad[word] += 1
            else:
                seen = observed[word]
                hit = [b for b in bases if b in seen]
                if hit:
                    label, base = 1, hit[0]
                elif bases and pron + alphabet.ezafe_suffix(pron) not in seen:
                    bad[word] += 1
            labels.append(EzafeLabel(window, label, pron, base))
    if bad:
        log.warning("%d words with no derivable ezafe label", sum(bad.values()))
    return EzafeLabeling(labels, bad)


def pron_frequencies(labeling: EzafeLabeling) -> dict:
    """Counts of ``(word, base pronunciation)`` over labelled corpus tokens."""
    return dict(collections.Counter((lab.window.target, lab.base) for lab in labeling.labels))


# splits -------------------------------------------------------------------

def split_corpus(corpus, seed: int):
    """Seeded shuffle then an 80/5/15 split by sentence (train and validation floored)."""
    corpus = list(corpus)
    n = len(corpus)
    if n < 20:
        raise CorpusError(f"corpus of {n} sentences is too small to split (need 20)")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    n_train = (80 * n) // 100
    n_val = (5 * n) // 100
    pick = [corpus[i] for i in order]
    return pick[:n_train], pick[n_train:n_train + n_val], pick[n_train + n_val:]


def oov_test_subset(test_pairs, train_vocab) -> list:
    """Unique ``(word, pron)`` pairs from the test data whose word never occurs in training."""
    out, seen = [], set()
    for word, pron in test_pairs:
        if word not in train_vocab and word not in seen:
            seen.add(word)
            out.append((word, pron))
    return out
