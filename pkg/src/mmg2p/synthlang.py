"""A rule-generated toy language with planted homographs and an ezafe-like suffix.

Every word is spelled with Latin letters and transcribed by a longest-match rule
table.  Three grapheme-level features drive the context effects:

* class A: the word's first letter is in ``class_a_letters``;
* takes ezafe: the word's last letter is in ``ezafe_letters``;
* sense: ``sense_of[last letter]`` in {0, 1, 2}.

A word that takes ezafe gets the suffix ("e" after a consonant, "ye" after a
vowel) exactly when the next word is class A.  A homograph with ``n`` readings
uses reading ``sense(next) % n``, or reading 0 at the end of a sentence.  Both
rules look only at the next word, so the 5-token window always suffices.
"""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .lexicon import CorpusSample, LexiconEntry, Variant, format_corpus, serialize_lexicon
from .text import Alphabet

LETTERS = "abcdefghijklmnopqrstuvwxyz"
VOWEL_PHONEMES = "aeiou/"
CONSONANT_PHONEMES = "ybdgklmnprstz$xfcqhjvw"
VOWEL_LETTERS = "aeiou"


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 7
    vocab_size: int = 500
    n_graphemes: int = 26
    n_phonemes: int = 20
    n_homographs: int = 10
    class_a_fraction: float = 0.3
    ezafe_fraction: float = 0.6
    n_exceptions: int = 5
    unlisted_fraction: float = 0.05
    n_bigram_rules: int = 3
    # consonant letters that carry an unwritten vowel
    n_syllabic: int = 0
    corpus_size: int = 20000
    min_sentence: int = 4
    max_sentence: int = 10
    min_word: int = 3
    max_word: int = 8
    zipf_exponent: float = 1.1
    zipf_shift: float = 5.0
    # explicit "graphemes=phonemes" rules; generated from the seed when empty
    rules: tuple = field(default_factory=tuple)

    @classmethod
    def from_dict(cls, values: dict) -> "SynthSpec":
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for key, value in values.items():
            if key not in kinds:
                raise SynthError(f"unknown synth spec key {key!r}")
            if key == "rules":
                out[key] = tuple(value.split()) if isinstance(value, str) else tuple(value)
            elif kinds[key] == "float":
                out[key] = float(value)
            else:
                out[key] = int(value)
        return cls(**out)


class RuleTable:
    """Longest-match grapheme-string to phoneme-string rewriting."""

    def __init__(self, rules, phonemes):
        self.rules = {}
        for src, dst in rules:
            if not src:
                raise SynthError("empty rule source")
            if src in self.rules and self.rules[src] != dst:
                raise SynthError(f"ambiguous rule table: {src!r} -> {self.rules[src]!r} and {dst!r}")
            bad = set(dst) - set(phonemes)
            if bad:
                raise SynthError(f"rule {src!r} emits non-phonemes {sorted(bad)}")
            self.rules[src] = dst
        self.longest = max(len(k) for k in self.rules)

    def covers(self, letters) -> bool:
        return all(ch in self.rules for ch in letters)

    def apply(self, word: str) -> str:
        out, i = [], 0
        while i < len(word):
            for n in range(min(self.longest, len(word) - i), 0, -1):
                piece = word[i:i + n]
                if piece in self.rules:
                    out.append(self.rules[piece])
                    i += n
                    break
            else:
                raise SynthError(f"no rule covers {word[i]!r} in {word!r}")
        return "".join(out)

    def as_strings(self) -> tuple:
        return tuple(f"{k}={v}" for k, v in self.rules.items())


@dataclass
class Language:
    spec: SynthSpec
    alphabet: Alphabet
    table: RuleTable
    class_a_letters: frozenset
    ezafe_letters: frozenset
    sense_of: dict
    vocab: list
    weights: list
    readings: dict          # homograph -> tuple of prons (index = reading)
    exceptions: dict        # word -> (alternative, primary)

    def is_class_a(self, word: str) -> bool:
        return word[0] in self.class_a_letters

    def takes_ezafe(self, word: str) -> bool:
        return word[-1] in self.ezafe_letters

    def sense(self, word: str) -> int:
        return self.sense_of[word[-1]]

    def base_pron(self, word: str, next_word: str | None) -> str:
        if word in self.readings:
            options = self.readings[word]
            return options[0 if next_word is None else self.sense(next_word) % len(options)]
        return self.table.apply(word)

    def transcribe(self, words) -> list:
        out = []
        for i, w in enumerate(words):
            nxt = words[i + 1] if i + 1 < len(words) else None
            pron = self.base_pron(w, nxt)
            if nxt is not None and self.takes_ezafe(w) and self.is_class_a(nxt):
                pron += self.alphabet.ezafe_suffix(pron)
            out.append(pron)
        return out

    def ezafe_gold(self, words) -> list:
        return [int(i + 1 < len(words) and self.takes_ezafe(w) and self.is_class_a(words[i + 1]))
                for i, w in enumerate(words)]


def _alphabet(spec: SynthSpec) -> Alphabet:
    if not 8 <= spec.n_graphemes <= len(LETTERS):
        raise SynthError(f"n_graphemes must be in [8, {len(LETTERS)}]")
    n_cons = spec.n_phonemes - len(VOWEL_PHONEMES)
    if not 2 <= n_cons <= len(CONSONANT_PHONEMES):
        raise SynthError("n_phonemes out of range")
    phonemes = tuple(VOWEL_PHONEMES) + tuple(CONSONANT_PHONEMES[:n_cons])
    return Alphabet(tuple(LETTERS[:spec.n_graphemes]), phonemes, frozenset(VOWEL_PHONEMES))


def _rules(spec: SynthSpec, alphabet: Alphabet, rng: random.Random) -> RuleTable:
    if spec.rules:
        pairs = []
        for item in spec.rules:
            src, sep, dst = item.partition("=")
            if not sep:
                raise SynthError(f"rule {item!r} is not of the form graphemes=phonemes")
            pairs.append((src, dst))
        table = RuleTable(pairs, alphabet.phonemes)
        if not table.covers(alphabet.graphemes):
            raise SynthError("rule table does not cover every grapheme")
        return table
    letters = list(alphabet.graphemes)
    vowels = [p for p in alphabet.phonemes if p in alphabet.vowels and p != "e"]
    consonants = [p for p in alphabet.phonemes if p not in alphabet.vowels]
    pairs = []
    cons_letters = [c for c in letters if c not in VOWEL_LETTERS]
    syllabic = set(rng.sample(cons_letters, min(spec.n_syllabic, len(cons_letters))))
    for ch in letters:
        if ch in VOWEL_LETTERS:
            pairs.append((ch, rng.choice(vowels)))
        elif ch in syllabic:
            # unwritten short vowel after the consonant
            pairs.append((ch, rng.choice(consonants) + rng.choice(vowels)))
        else:
            pairs.append((ch, rng.choice(consonants)))
    bigrams = set()
    while len(bigrams) < spec.n_bigram_rules:
        a, b = rng.sample(cons_letters, 2)
        bigrams.add(a + b)
    for bg in sorted(bigrams):
        pairs.append((bg, rng.choice(consonants)))
    return RuleTable(pairs, alphabet.phonemes)


def _letter_sets(spec, alphabet, rng):
    letters = list(alphabet.graphemes)
    shuffled = letters[:]
    rng.shuffle(shuffled)
    n_a = max(1, round(spec.class_a_fraction * len(letters)))
    class_a = frozenset(shuffled[:n_a])
    shuffled = letters[:]
    rng.shuffle(shuffled)
    n_ez = max(1, round(spec.ezafe_fraction * len(letters)))
    ezafe = frozenset(shuffled[:n_ez])
    sense = {ch: rng.randrange(3) for ch in letters}
    return class_a, ezafe, sense


def _make_word(lang_parts, rng, spec, taken) -> str | None:
    letters, class_a, ezafe, table = lang_parts
    first_a = rng.random() < spec.class_a_fraction
    last_ez = rng.random() < spec.ezafe_fraction
    first_pool = [c for c in letters if (c in class_a) == first_a]
    last_pool = [c for c in letters if (c in ezafe) == last_ez]
    if not first_pool or not last_pool:
        return None
    n = rng.randint(spec.min_word, spec.max_word)
    word = rng.choice(first_pool) + "".join(rng.choice(letters) for _ in range(n - 2)) \
        + rng.choice(last_pool)
    if word in taken:
        return None
    pron = table.apply(word)
    # base forms never end in "e", so a final "e" always signals ezafe
    if not pron or pron.endswith("e"):
        return None
    return word


def build_language(spec: SynthSpec) -> Language:
    rng = random.Random(spec.seed)
    alphabet = _alphabet(spec)
    # own stream, so an explicit rule list leaves the rest of the language unchanged
    table = _rules(spec, alphabet, random.Random(f"rules-{spec.seed}"))
    class_a, ezafe, sense = _letter_sets(spec, alphabet, rng)
    parts = (list(alphabet.graphemes), class_a, ezafe, table)
    vocab, taken = [], set()
    tries = 0
    while len(vocab) < spec.vocab_size:
        tries += 1
        if tries > 200 * spec.vocab_size:
            raise SynthError("could not generate enough distinct words")
        w = _make_word(parts, rng, spec, taken)
        if w is not None:
            taken.add(w)
            vocab.append(w)
    weights = [(r + 1 + spec.zipf_shift) ** -spec.zipf_exponent for r in range(len(vocab))]
    if spec.n_homographs + spec.n_exceptions > len(vocab):
        raise SynthError("too many homographs/exceptions for the vocabulary")
    # homographs among the frequent words so every reading is seen in training
    head = list(range(min(len(vocab), max(60, 6 * spec.n_homographs))))
    picks = rng.sample(head, spec.n_homographs)
    readings = {}
    for i in picks:
        w = vocab[i]
        p = table.apply(w)
        options = [p, p[:1] + "/" + p[1:], p[:1] + "o" + p[1:]]
        readings[w] = tuple(options[:rng.choice((2, 3))])
    rest = [i for i in range(len(vocab)) if vocab[i] not in readings]
    exceptions = {}
    for i in rng.sample(rest[: max(len(rest) // 2, spec.n_exceptions)], spec.n_exceptions):
        w = vocab[i]
        p = table.apply(w)
        exceptions[w] = (p[:1] + "i" + p[1:], p)
    return Language(spec, alphabet, table, class_a, ezafe, sense, vocab, weights, readings,
                    exceptions)


def oracle(spec_or_lang, sentence) -> list:
    """Rule-determined gold pronunciation of every word (ezafe realised)."""
    lang = spec_or_lang if isinstance(spec_or_lang, Language) else build_language(spec_or_lang)
    known = set(lang.vocab)
    for w in sentence:
        if w not in known:
            raise SynthError(f"{w!r} is not in the synthetic vocabulary")
    return lang.transcribe(list(sentence))


def sample_sentences(lang: Language, n: int, rng: random.Random) -> list:
    cum = list(itertools.accumulate(lang.weights))
    total = cum[-1]
    out = []
    for _ in range(n):
        k = rng.randint(lang.spec.min_sentence, lang.spec.max_sentence)
        out.append([lang.vocab[bisect.bisect(cum, rng.random() * total)] for _ in range(k)])
    return out


@dataclass
class SynthOutput:
    language: Language
    lexicon: str
    corpus: str
    exceptions: str
    alphabet: str
    unlisted: tuple

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "alphabet": out / "alphabet.tsv",
            "lexicon": out / "lexicon.txt",
            "corpus": out / "corpus.tsv",
            "exceptions": out / "exceptions.tsv",
        }
        paths["alphabet"].write_text(self.alphabet, encoding="utf-8")
        paths["lexicon"].write_text(self.lexicon, encoding="utf-8")
        paths["corpus"].write_text(self.corpus, encoding="utf-8")
        paths["exceptions"].write_text(self.exceptions, encoding="utf-8")
        spec = {k: v for k, v in asdict(self.language.spec).items()}
        spec["rules"] = " ".join(self.language.table.as_strings())
        (out / "synth_spec.txt").write_text(
            "".join(f"{k} = {v}\n" for k, v in spec.items()), encoding="utf-8")
        return paths


def _entry(lang: Language, word: str) -> LexiconEntry:
    tag = "N1" if lang.takes_ezafe(word) else "V1"
    if word in lang.readings:
        prons = [(f"{tag[0]}{i + 1}", p) for i, p in enumerate(lang.readings[word])]
    elif word in lang.exceptions:
        prons = [(tag, p) for p in lang.exceptions[word]]
    else:
        prons = [(tag, lang.table.apply(word))]
    variants = []
    for t, p in prons:
        variants.append(Variant(t, p))
        if lang.takes_ezafe(word):
            variants.append(Variant(t + "GEN", p + lang.alphabet.ezafe_suffix(p)))
    return LexiconEntry(word, tuple(variants))


def generate(spec: SynthSpec) -> SynthOutput:
    """Build the language, sample a corpus and emit lexicon / corpus / exception files."""
    lang = build_language(spec)
    rng = random.Random(f"corpus-{spec.seed}")
    sentences = sample_sentences(lang, spec.corpus_size, rng)
    samples = [CorpusSample(tuple(s), tuple(lang.transcribe(s))) for s in sentences]
    # unlisted words never take ezafe, so their labels stay derivable without the lexicon
    eligible = [w for w in lang.vocab
                if w not in lang.readings and w not in lang.exceptions and not lang.takes_ezafe(w)]
    n_unlisted = min(len(eligible), round(spec.unlisted_fraction * spec.vocab_size))
    unlisted = tuple(sorted(rng.sample(eligible, n_unlisted)))
    skip = set(unlisted)
    entries = [_entry(lang, w) for w in sorted(lang.vocab) if w not in skip]
    return SynthOutput(
        language=lang,
        lexicon=serialize_lexicon(entries),
        corpus=format_corpus(samples),
        exceptions="".join(f"{w}\n" for w in sorted(lang.exceptions)),
        alphabet=lang.alphabet.to_text(),
        unlisted=unlisted,
    )


def novel_words(lang: Language, n: int, seed: int = 0) -> list:
    """Fresh words outside the vocabulary, spelled by the same process, with rule prons."""
    rng = random.Random(f"novel-{lang.spec.seed}-{seed}")
    parts = (list(lang.alphabet.graphemes), lang.class_a_letters, lang.ezafe_letters, lang.table)
    taken = set(lang.vocab)
    out = []
    while len(out) < n:
        w = _make_word(parts, rng, lang.spec, taken)
        if w is not None:
            taken.add(w)
            out.append(w)
    return out


def novel_sentences(lang: Language, n: int, seed: int = 0, novel_rate: float = 0.3) -> tuple:
    """Sentences where each token is swapped for a never-seen word with ``novel_rate``.

    Returns ``(samples, novel)`` where ``novel`` is the set of substituted words.
    Gold prons come from the generating rules, so they stay exact for new words.
    """
    rng = random.Random(f"novel-sent-{lang.spec.seed}-{seed}")
    base = sample_sentences(lang, n, rng)
    pool = novel_words(lang, max(50, n), seed)
    novel, samples = set(), []
    for words in base:
        words = [rng.choice(pool) if rng.random() < novel_rate else w for w in words]
        novel.update(w for w in words if w not in lang.readings and w in pool)
        samples.append(CorpusSample(tuple(words), tuple(lang.transcribe(words))))
    return samples, novel
