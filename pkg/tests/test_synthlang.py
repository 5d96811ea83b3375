import dataclasses

import pytest

from mmg2p import synthlang
from mmg2p.lexicon import build_dicts, derive_ezafe_labels, parse_corpus, parse_lexicon, parse_word_list
from mmg2p.manifest import parse_kv
from mmg2p.text import Alphabet

from conftest import TINY_SPEC


def test_same_spec_is_byte_identical(tmp_path, tiny_synth):
    again = synthlang.generate(TINY_SPEC)
    assert (again.lexicon, again.corpus, again.alphabet) == (
        tiny_synth.lexicon, tiny_synth.corpus, tiny_synth.alphabet)
    a = tiny_synth.write(tmp_path / "a")
    b = again.write(tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes()


def test_spec_file_round_trip(tmp_path, tiny_synth):
    tiny_synth.write(tmp_path)
    values = parse_kv((tmp_path / "synth_spec.txt").read_text("utf-8"))
    spec = synthlang.SynthSpec.from_dict(values)
    assert dataclasses.replace(spec, rules=()) == TINY_SPEC
    # the explicit rule list regenerates the same language
    assert synthlang.generate(spec).corpus == tiny_synth.corpus


def test_unknown_spec_key():
    with pytest.raises(synthlang.SynthError):
        synthlang.SynthSpec.from_dict({"colour": "red"})


def test_ambiguous_rules_rejected():
    with pytest.raises(synthlang.SynthError, match="ambiguous"):
        synthlang.RuleTable([("a", "x"), ("a", "y")], "xy")
    with pytest.raises(synthlang.SynthError):
        synthlang.RuleTable([("a", "q")], "xy")


def test_rule_table_longest_match():
    t = synthlang.RuleTable([("a", "x"), ("b", "y"), ("ab", "z")], "xyz")
    assert t.apply("aab") == "xz"
    assert t.apply("ba") == "yx"


def test_corpus_matches_oracle(tiny_synth):
    lang = tiny_synth.language
    for s in parse_corpus(tiny_synth.corpus):
        assert list(s.phonemes) == synthlang.oracle(lang, s.graphemes)
    with pytest.raises(synthlang.SynthError):
        synthlang.oracle(lang, ["notaword!"])


def test_zero_underivable(tiny_synth):
    entries = parse_lexicon(tiny_synth.lexicon)
    corpus = parse_corpus(tiny_synth.corpus)
    alphabet = Alphabet.from_text(tiny_synth.alphabet)
    lab = derive_ezafe_labels(corpus, entries, alphabet)
    assert lab.underivable_count == 0
    lang = tiny_synth.language
    gold = [g for s in corpus for g in lang.ezafe_gold(s.graphemes)]
    assert [x.label for x in lab.labels] == gold


def test_ezafe_and_homograph_rules(tiny_synth):
    lang = tiny_synth.language
    a_word = next(w for w in lang.vocab if lang.is_class_a(w))
    ez_word = next(w for w in lang.vocab if lang.takes_ezafe(w) and w not in lang.readings)
    pron = lang.transcribe([ez_word, a_word])[0]
    assert pron.endswith(lang.alphabet.ezafe_suffix(lang.table.apply(ez_word)))
    h = next(iter(lang.readings))
    by_sense = {}
    for w in lang.vocab:
        by_sense.setdefault(lang.sense(w) % len(lang.readings[h]), w)
    prons = {lang.base_pron(h, w) for w in by_sense.values()}
    assert len(prons) == len(lang.readings[h]) >= 2


def test_homograph_dictionary(tiny_synth):
    entries = parse_lexicon(tiny_synth.lexicon)
    d = build_dicts(entries, exceptions=parse_word_list(tiny_synth.exceptions))
    assert set(d.homographs) == set(tiny_synth.language.readings)
    spec = dataclasses.replace(TINY_SPEC, n_homographs=0)
    out = synthlang.generate(spec)
    assert build_dicts(parse_lexicon(out.lexicon),
                       exceptions=parse_word_list(out.exceptions)).homographs == {}


def test_novel_words_are_new(tiny_synth):
    lang = tiny_synth.language
    words = synthlang.novel_words(lang, 30, seed=1)
    assert len(set(words)) == 30
    assert not set(words) & set(lang.vocab)
    assert words == synthlang.novel_words(lang, 30, seed=1)
    samples, novel = synthlang.novel_sentences(lang, 40, seed=2)
    assert novel and novel <= set(words) | set(synthlang.novel_words(lang, 50, seed=2))
    for s in samples:
        assert list(s.phonemes) == lang.transcribe(list(s.graphemes))
