import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmg2p.context import (ContextConfig, EzafeModelI, EzafeModelII, HomographModel,
                           format_windows, predict_ezafe, predict_homograph, read_windows, snap,
                           train_ezafe_i, train_ezafe_ii, train_homograph, word_vocabulary)
from mmg2p.nn import load_checkpoint, save_checkpoint
from mmg2p.text import PAD, UNK, Window5, edit_distance, make_windows

from test_text import _brute_distance

TINY = ContextConfig(char_emb=8, hidden=8, phon_emb=8, dec_hidden=16, batch=8)


def test_snap_unchanged_when_allowed():
    assert snap("mibord", {"mibord", "mib/r/d"}) == ("mibord", 0, False)


def test_snap_nearest():
    allowed = ["mib/r/d", "mibor/d", "mibord"]
    # distances checked against the exhaustive recursion, not taken on trust
    assert [_brute_distance("mibrd", a) for a in allowed] == [2, 2, 1]
    assert snap("mibrd", allowed) == ("mibord", 1, False)


def test_snap_tie_is_seeded():
    allowed = {"ab", "ba"}
    picks = {snap("aa", allowed, seed=s)[0] for s in range(40)}
    assert picks == allowed
    for s in range(10):
        first = snap("aa", allowed, seed=s)
        assert first == snap("aa", allowed, seed=s)
        assert first[1:] == (1, True)
    with pytest.raises(ValueError):
        snap("aa", set())


@settings(max_examples=500, deadline=None)
@given(st.text(alphabet="ab/o", max_size=7),
       st.lists(st.text(alphabet="ab/o", max_size=7), min_size=1, max_size=5),
       st.integers(0, 1000))
def test_snap_is_in_allowed_and_minimal(decoded, allowed, seed):
    pron, dist, _ = snap(decoded, allowed, seed)
    assert pron in allowed
    assert dist == edit_distance(decoded, pron) == min(edit_distance(decoded, a) for a in allowed)


def _windows(sentences):
    return [w for s in sentences for w in make_windows(s)]


def test_homograph_model_seeded_and_checkpointable(persian):
    wins = _windows([["من", "کتاب", "را", "می‌برد"], ["او", "می‌برد"]])
    targets = ["m/n", "ketab", "ra", "mib/r/d", "u", "mibord"]
    homographs = {"می‌برد": ("mib/r/d", "mibord")}
    a = train_homograph(wins, targets, homographs, persian, TINY, seed=3, steps=6)
    b = train_homograph(wins, targets, homographs, persian, TINY, seed=3, steps=6)
    assert a.train_log.losses == b.train_log.losses
    assert save_checkpoint(a) == save_checkpoint(b)
    again = load_checkpoint(save_checkpoint(a), persian)
    assert [d.pron for d in again.decode(wins)] == [d.pron for d in a.decode(wins)]


def test_homograph_training_without_homographs(persian):
    wins = _windows([["آب", "نان"]])
    model = train_homograph(wins, ["ab", "nan"], {}, persian, TINY, seed=0, steps=3)
    assert len(model.train_log.losses) == 1


def test_untrained_model_on_padded_windows(persian):
    model = HomographModel(persian, TINY, seed=1)
    win = Window5((PAD, PAD, "می‌برد", PAD, PAD))
    res = predict_homograph(model, win, {"mib/r/d", "mibord"}, seed=5)
    assert res.pron in {"mib/r/d", "mibord"}
    assert set(res.raw) <= set(persian.phonemes)
    assert predict_homograph(model, win, {"mib/r/d", "mibord"}, seed=5) == res
    assert predict_homograph(model, win, {"mibord", "mib/r/d"}, seed=5, beam=3).pron in {
        "mib/r/d", "mibord"}


def test_homograph_learns_next_word_rule(persian):
    # reading chosen by the next word; every other token is a plain word
    sents, targets = [], []
    rng = random.Random(0)
    for _ in range(40):
        nxt = rng.choice(["آب", "نان"])
        sents.append(["او", "برد", nxt])
        targets += ["u", "b/r/d" if nxt == "آب" else "bord", "ab" if nxt == "آب" else "nan"]
    model = train_homograph(_windows(sents), targets, {"برد": ("b/r/d", "bord")}, persian,
                            ContextConfig(batch=16), seed=0, steps=120)
    for nxt, want in (("آب", "b/r/d"), ("نان", "bord")):
        win = make_windows(["او", "برد", nxt])[1]
        assert predict_homograph(model, win, {"b/r/d", "bord"}).pron == want


def test_ezafe_probabilities_and_batch_independence(persian):
    model = EzafeModelI(persian, TINY, seed=2)
    wins = _windows([["خودکار", "قرمز", "را", "برداشتم"], ["رنگ", "آن", "خودکار", "قرمز", "است"]])
    p = model.probs(wins)
    assert p.shape == (len(wins), 2)
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    # a window's output does not depend on what else is in the batch
    alone = np.stack([model.probs([w])[0] for w in wins])
    np.testing.assert_allclose(p, alone, atol=1e-6)
    assert predict_ezafe(model, Window5((PAD, PAD, "خودکار", PAD, PAD))) in (0, 1)


def test_ezafe_context_contrast(persian):
    """Model I separates the two contexts of the same word after training."""
    s1 = ["خودکار", "قرمز", "را", "برداشتم"]
    s2 = ["رنگ", "آن", "خودکار", "قرمز", "است"]
    wins = _windows([s1, s2]) * 10
    labels = [1, 0, 0, 0, 0, 0, 0, 0, 0] * 10
    model = train_ezafe_i(wins, labels, persian, ContextConfig(batch=16), seed=0, steps=80)
    assert predict_ezafe(model, make_windows(s1)[0]) == 1
    assert predict_ezafe(model, make_windows(s2)[2]) == 0


def test_ezafe_ii_unknown_words_share_unk(persian):
    wins = _windows([["الف", "ب"], ["الف", "ج"]])
    assert word_vocabulary(wins, min_count=2) == ["الف"]
    model = train_ezafe_ii(wins, [1, 0, 1, 0], persian, TINY, seed=0, steps=3)
    assert model.vocab.index("ناشناخته") == model.vocab.index(UNK)
    a = model.probs([Window5((PAD, PAD, "ناشناخته", PAD, PAD))])
    b = model.probs([Window5((PAD, PAD, "دیگر", PAD, PAD))])
    np.testing.assert_allclose(a, b)
    again = load_checkpoint(save_checkpoint(model), persian)
    assert isinstance(again, EzafeModelII)
    np.testing.assert_allclose(again.probs(wins), model.probs(wins))


def test_ezafe_single_class_warns(persian, caplog):
    wins = _windows([["الف", "ب"]])
    train_ezafe_i(wins, [0, 0], persian, TINY, seed=0, steps=1)
    assert "degenerate" in caplog.text


def test_windows_file_round_trip():
    rows = [(Window5((PAD, "a", "b", "c", PAD)), "1")]
    assert read_windows(format_windows(rows)) == rows
    with pytest.raises(ValueError):
        read_windows("a\tb\n")
