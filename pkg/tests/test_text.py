import collections
import functools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmg2p.text import (PAD, UNK, ZWNJ, Alphabet, Token, Window5, edit_distance, make_windows,
                        normalize, tokenize)


def test_zwnj_word_survives_normalization(persian):
    word = "کتاب" + ZWNJ + "هایشان"
    assert normalize(word, persian) == word
    assert tokenize(normalize(word, persian)) == [Token(word)]


def test_empty_and_whitespace(persian):
    assert normalize("", persian) == ""
    assert tokenize("") == []
    assert normalize("آب  نان", persian) == "آب نان"
    assert normalize("  آب\tنان\n", persian) == "آب نان"


def test_presentation_forms_and_variants_fold(persian):
    # Arabic yeh / kaf and an isolated presentation-form beh
    assert normalize("يك", persian) == "یک"
    assert normalize("ﺏ", persian) == "ب"


def test_unknown_characters_become_unk(persian):
    report = collections.Counter()
    assert normalize("آبZ", persian, report=report) == "آب" + UNK
    assert report["unk"] == 1


def test_stray_zwnj_dropped(persian):
    assert normalize(ZWNJ + "آب" + ZWNJ, persian) == "آب"
    assert normalize("آب" + ZWNJ + " نان", persian) == "آب نان"


def test_tokenize_sentence_with_punctuation(persian):
    toks = tokenize(normalize("خودکار قرمز را برداشتم.", persian))
    assert [t.text for t in toks] == ["خودکار", "قرمز", "را", "برداشتم", "."]
    assert [t.is_punct for t in toks] == [False] * 4 + [True]


def test_windows_padding():
    (w,) = make_windows(["a"])
    assert w.words == (PAD, PAD, "a", PAD, PAD)
    first, second = make_windows(["a", "b"])
    assert first.words == (PAD, PAD, "a", "b", PAD)
    assert second.words == (PAD, "a", "b", PAD, PAD)
    assert make_windows(list("abcde"))[2].words == tuple("abcde")


def test_windows_drop_punct_by_default():
    toks = [Token("a"), Token(",", True), Token("b")]
    assert [w.target for w in make_windows(toks)] == ["a", "b"]
    assert [w.target for w in make_windows(toks, keep_punct=True)] == ["a", ",", "b"]


def test_window_rejects_pad_target():
    with pytest.raises(ValueError):
        Window5((PAD,) * 5)
    with pytest.raises(ValueError):
        Window5(("a", "b"))


def test_alphabet_text_round_trip(persian):
    again = Alphabet.from_text(persian.to_text())
    assert again == persian
    assert persian.ezafe_suffix("d/ft/r") == "e"
    assert persian.ezafe_suffix("xane") == "ye"


def test_alphabet_rejects_reserved_and_multichar():
    with pytest.raises(ValueError):
        Alphabet(("a",), ("ab",))
    with pytest.raises(ValueError):
        Alphabet(("#",), ("a",))


def _brute_distance(a, b):
    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (a[i] != b[j]))
    return go(0, 0)


def test_edit_distance_examples():
    assert edit_distance("abc", "abc") == 0
    assert edit_distance("abc", "abd") == 1
    assert edit_distance("", "abc") == 3


short = st.text(alphabet="abc/$", max_size=6)


@settings(max_examples=300, deadline=None)
@given(short, short)
def test_edit_distance_matches_recursion(a, b):
    assert edit_distance(a, b) == _brute_distance(a, b)


@settings(max_examples=300, deadline=None)
@given(short, short, short)
def test_edit_distance_is_a_metric(a, b, c):
    assert edit_distance(a, b) == edit_distance(b, a)
    assert (edit_distance(a, b) == 0) == (a == b)
    assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)
