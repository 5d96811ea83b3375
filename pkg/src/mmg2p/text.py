"""Alphabets, normalisation, tokenisation, 5-token windows and edit distance."""

from __future__ import annotations

import collections
import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

PAD = "<PAD>"
BOS = "<s>"
EOS = "</s>"
UNK = "\ufffd"
BORDER = "#"
OPEN = "("
CLOSE = ")"
SPECIALS = (PAD, BOS, EOS, UNK, BORDER, OPEN, CLOSE)

ZWNJ = "\u200c"
WINDOW = 5
CENTER = WINDOW // 2

_CODEPOINT = re.compile(r"^U\+([0-9A-Fa-f]{4,6})$")
_PRESENTATION = ((0xFB50, 0xFDFF), (0xFE70, 0xFEFF))


def _decode_field(text: str) -> str:
    """A field is literal text, or space-separated ``U+XXXX`` / literal pieces."""
    if not any(_CODEPOINT.match(p) for p in text.split(" ")):
        return text
    return "".join(chr(int(m.group(1), 16)) if (m := _CODEPOINT.match(p)) else p
                   for p in text.split(" ") if p)


def _records(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two TAB-separated fields")
        yield lineno, _decode_field(parts[0]), _decode_field(parts[1])


@dataclass(frozen=True)
class Alphabet:
    graphemes: tuple
    phonemes: tuple
    vowels: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if len(set(self.graphemes)) != len(self.graphemes):
            raise ValueError("duplicate grapheme")
        if len(set(self.phonemes)) != len(self.phonemes):
            raise ValueError("duplicate phoneme")
        for p in self.phonemes:
            if len(p) != 1:
                raise ValueError(f"phoneme {p!r} is not a single character")
        for s in SPECIALS:
            if s in self.graphemes or s in self.phonemes:
                raise ValueError(f"reserved symbol {s!r} used in the inventory")
        if not self.vowels <= set(self.phonemes):
            raise ValueError("vowel set must be a subset of the phonemes")
        object.__setattr__(self, "_phoneme_set", frozenset(self.phonemes))
        object.__setattr__(self, "grapheme_set", frozenset(self.graphemes))

    @property
    def phoneme_class(self) -> dict:
        return {p: "vowel" if p in self.vowels else "consonant" for p in self.phonemes}

    def is_vowel(self, phoneme: str) -> bool:
        return phoneme in self.vowels

    def ezafe_suffix(self, pron: str) -> str:
        """Suffix realising ezafe after ``pron``: "e" after a consonant, "ye" after a vowel."""
        if not pron:
            raise ValueError("ezafe needs a non-empty pronunciation")
        return "ye" if self.is_vowel(pron[-1]) else "e"

    def check_phonemes(self, pron: str) -> str:
        bad = [c for c in pron if c not in self._phoneme_set]
        if bad:
            raise ValueError(f"symbols {''.join(bad)!r} in {pron!r} are not phonemes")
        return pron

    def is_phonemes(self, pron: str) -> bool:
        return all(c in self._phoneme_set for c in pron)

    def canonical(self) -> str:
        lines = [f"{g}\tgrapheme" for g in self.graphemes]
        lines += [f"{p}\t{self.phoneme_class[p]}" for p in self.phonemes]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = []
        for line in self.canonical().splitlines():
            sym, cls = line.split("\t")
            if not sym.isprintable() or sym.isspace():
                sym = f"U+{ord(sym):04X}"
            out.append(f"{sym}\t{cls}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Alphabet":
        graphemes, phonemes, vowels = [], [], set()
        for lineno, sym, kind in _records(text):
            if kind == "grapheme":
                graphemes.append(sym)
            elif kind in ("vowel", "consonant"):
                phonemes.append(sym)
                if kind == "vowel":
                    vowels.add(sym)
            else:
                raise ValueError(f"line {lineno}: unknown class {kind!r}")
        return cls(tuple(graphemes), tuple(phonemes), frozenset(vowels))

    @classmethod
    def from_file(cls, path) -> "Alphabet":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    @classmethod
    def persian(cls) -> "Alphabet":
        return cls.from_text(_data("persian_alphabet.tsv"))


def _data(name: str) -> str:
    return resources.files("mmg2p.data").joinpath(name).read_text(encoding="utf-8")


def load_table(text: str) -> dict:
    return {src: dst for _, src, dst in _records(text)}


def default_table() -> dict:
    return load_table(_data("normalization.tsv"))


def is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(raw: str, alphabet: Alphabet, table: dict | None = None,
              report: collections.Counter | None = None) -> str:
    """Canonicalise ``raw`` for the given alphabet.

    Presentation forms are folded with NFKC, then ``table`` (default: the shipped
    Persian table) maps variants.  Anything not a grapheme, punctuation, ZWNJ or
    whitespace becomes UNK; ``report["unk"]`` counts those substitutions.
    """
    table = default_table() if table is None else table
    allowed = alphabet.grapheme_set
    chars = []
    for ch in raw:
        if any(lo <= ord(ch) <= hi for lo, hi in _PRESENTATION):
            ch = unicodedata.normalize("NFKC", ch)
        for d in "".join(table.get(c, c) for c in ch):
            if d.isspace():
                chars.append(" ")
            elif d == ZWNJ or d in allowed or d == UNK or is_punct(d):
                chars.append(d)
            else:
                chars.append(UNK)
                if report is not None:
                    report["unk"] += 1
    out = []
    for i, c in enumerate(chars):
        if c == ZWNJ:
            prev = out[-1] if out else " "
            nxt = next((d for d in chars[i + 1:] if d != ZWNJ), " ")
            if prev in (" ", ZWNJ) or nxt == " " or is_punct(prev) or is_punct(nxt):
                continue
        if c == " " and (not out or out[-1] == " "):
            continue
        out.append(c)
    return "".join(out).strip(" ")


@dataclass(frozen=True)
class Token:
    text: str
    is_punct: bool = False


def tokenize(normalized: str) -> list:
    tokens = []
    for chunk in normalized.split():
        word = []
        for ch in chunk:
            if is_punct(ch):
                if word:
                    tokens.append(Token("".join(word)))
                    word = []
                tokens.append(Token(ch, True))
            else:
                word.append(ch)
        if word:
            tokens.append(Token("".join(word)))
    return tokens


@dataclass(frozen=True)
class Window5:
    words: tuple

    def __post_init__(self):
        if len(self.words) != WINDOW:
            raise ValueError(f"window needs {WINDOW} words, got {len(self.words)}")
        if self.words[CENTER] == PAD:
            raise ValueError("window target cannot be PAD")

    @property
    def target(self) -> str:
        return self.words[CENTER]

    @property
    def pad_mask(self) -> tuple:
        return tuple(w == PAD for w in self.words)


def make_windows(tokens, keep_punct: bool = False) -> list:
    """One window per word token, centred on it and padded with PAD at sentence edges.

    Punctuation tokens are dropped from the context unless ``keep_punct``.
    """
    words = [t.text if isinstance(t, Token) else t for t in tokens
             if keep_punct or not (isinstance(t, Token) and t.is_punct)]
    padded = [PAD] * CENTER + words + [PAD] * CENTER
    return [Window5(tuple(padded[i:i + WINDOW])) for i in range(len(words))]


def edit_distance(a, b) -> int:
    """Levenshtein distance with unit insertion, deletion and substitution costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]
