import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmg2p.metrics import (EvalRow, ezafe_accuracy, format_eval_rows, homograph_score,
                           parse_eval_rows, word_accuracy)


def test_word_accuracy():
    assert word_accuracy(["a", "b"], ["a", "b"]) == 1.0
    assert word_accuracy(["x", "y"], ["a", "b"]) == 0.0
    assert word_accuracy(list("abcd"), list("abcx")) == 0.75
    # nested per-sentence lists are flattened
    assert word_accuracy([["a"], ["b", "c"]], [["a"], ["b", "x"]]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        word_accuracy(["a"], ["a", "b"])


def test_ezafe_accuracy():
    assert ezafe_accuracy([0, 1, 1], [0, 1, 1]).accuracy == 1.0
    assert ezafe_accuracy([1, 0], [0, 1]).accuracy == 0.0
    rep = ezafe_accuracy([1] * 97 + [0] * 3, [1] * 100)
    assert rep.accuracy == 0.97
    assert rep.total == 100


def test_hand_case():
    samples = [("h", "P1", "P1"), ("h", "P1", "P1"), ("h", "P1", "P2"), ("h", "P2", "P1")]
    rep = homograph_score(samples, {"h": ("P1", "P2")})
    assert rep.per_homograph["h"].score == 1 / 3
    assert rep.score == 1 / 3
    assert rep.accuracy == 0.5


def test_unseen_pron_is_excluded():
    rep = homograph_score([("h", "a", "a")], {"h": ("a", "b", "c")})
    assert rep.score == 1.0
    assert rep.per_homograph["h"].n == 1
    assert rep.per_homograph["h"].unseen == ["b", "c"]


def test_gold_outside_inventory_raises():
    with pytest.raises(ValueError):
        homograph_score([("h", "z", "z")], {"h": ("a", "b")})


def brute_force_score(samples, inventory):
    """Double loop over homographs and their prons, exact rational arithmetic."""
    per = []
    for h in sorted(inventory):
        ratios = []
        for p in inventory[h]:
            seen = sum(1 for s in samples if s[0] == h and s[1] == p)
            if seen:
                right = sum(1 for s in samples if s[0] == h and s[1] == p and s[2] == p)
                ratios.append(Fraction(right, seen))
        if ratios:
            per.append(sum(ratios) / len(ratios))
    return float(sum(per) / len(per)) if per else 0.0


def random_case(rng):
    inventory = {f"h{i}": tuple(f"p{i}_{j}" for j in range(rng.randint(2, 4)))
                 for i in range(rng.randint(1, 10))}
    samples = []
    for _ in range(rng.randint(0, 60)):
        h = rng.choice(sorted(inventory))
        gold = rng.choice(inventory[h])
        hyp = gold if rng.random() < 0.6 else rng.choice(inventory[h] + ("junk",))
        samples.append((h, gold, hyp))
    return samples, inventory


def test_matches_brute_force_on_random_sets():
    rng = random.Random(0)
    for _ in range(300):
        samples, inventory = random_case(rng)
        assert abs(homograph_score(samples, inventory).score
                   - brute_force_score(samples, inventory)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_permutation_invariant_and_perfect_is_one(rnd):
    samples, inventory = random_case(rnd)
    shuffled = samples[:]
    rnd.shuffle(shuffled)
    assert homograph_score(shuffled, inventory).score == pytest.approx(
        homograph_score(samples, inventory).score, abs=1e-12)
    perfect = [(h, g, g) for h, g, _ in samples]
    if perfect:
        assert homograph_score(perfect, inventory).score == 1.0


def test_jsonl_and_rows_round_trip():
    rep = homograph_score([("h", "a", "a")], {"h": ("a", "b")})
    lines = rep.to_jsonl().splitlines()
    assert len(lines) == 2 and '"summary": true' in lines[-1]
    rows = [EvalRow(0, 1, "dict", "ab", "ab", 1, 0), EvalRow(2, 0, "oov", "x", "y", 0, 0)]
    assert parse_eval_rows(format_eval_rows(rows)) == rows
    with pytest.raises(ValueError):
        parse_eval_rows("1\t2\n")
