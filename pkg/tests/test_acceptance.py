"""Acceptance suite: one check per headline criterion, each printing a PASS/FAIL line.

The synthetic reproduction trains every module on the default synthetic language
(about 10 to 15 minutes on one CPU core) and is marked ``slow``.
"""

import collections
import json
import random
import time

import numpy as np
import pytest

from mmg2p import synthlang
from mmg2p.cli import main
from mmg2p.context import predict_homographs, snap
from mmg2p.experiment import (build_system, default_config, e2e_accuracy, evaluate_system,
                              gold_labels, prepare, train_module)
from mmg2p.lexicon import (LexiconParseError, derive_ezafe_labels, parse_corpus, parse_lexicon,
                           parse_word_list, serialize_lexicon)
from mmg2p.metrics import ezafe_accuracy, homograph_score
from mmg2p.nn.gradcheck import TOLERANCES, run_suite
from mmg2p.pipeline import Flags, apply_ezafe
from mmg2p.text import Alphabet, edit_distance, make_windows

from conftest import record_acceptance
from test_metrics import brute_force_score, random_case

SEED = 0
BUDGET_MINUTES = 30


# gradient checks ------------------------------------------------------------------

def test_gradient_checks():
    start = time.perf_counter()
    reports = run_suite(seed=0, shapes=20)
    elapsed = time.perf_counter() - start
    required = {"linear", "embedding", "gru_cell", "bigru", "attention", "transformer_block",
                "cross_entropy"}
    names = {r.name for r in reports}
    shapes_ok = all(len({k.split(":")[0] for k in r.errors}) >= 20 for r in reports)
    limits_ok = all(TOLERANCES[n] <= (1e-4 if n == "transformer_block" else 1e-5) for n in names)
    passed = (required <= names and all(r.passed for r in reports) and shapes_ok and limits_ok
              and elapsed < 120)
    worst = ", ".join(f"{r.name}={r.max_rel_error:.1e}" for r in reports)
    record_acceptance("gradient checks", passed, f"{elapsed:.1f}s; {worst}")
    assert passed


# metric oracle --------------------------------------------------------------------

def test_metric_oracle_equivalence():
    rng = random.Random(2024)
    worst = 0.0
    for _ in range(1000):
        samples, inventory = random_case(rng)
        assert len(inventory) <= 10 and all(len(p) <= 4 for p in inventory.values())
        worst = max(worst, abs(homograph_score(samples, inventory).score
                               - brute_force_score(samples, inventory)))
    hand = homograph_score([("h", "P1", "P1"), ("h", "P1", "P1"), ("h", "P1", "P2"),
                            ("h", "P2", "P1")], {"h": ("P1", "P2")})
    passed = worst <= 1e-12 and hand.score == 1 / 3
    record_acceptance("metric oracle equivalence", passed,
                      f"max |diff| {worst:.1e} over 1000 sets; hand case S={hand.score!r}")
    assert passed


# snapping -------------------------------------------------------------------------

def test_snapping_safety():
    rng = random.Random(7)
    symbols = "ab/oe$"
    bad = 0
    for i in range(10_000):
        decoded = "".join(rng.choice(symbols) for _ in range(rng.randint(0, 8)))
        allowed = {"".join(rng.choice(symbols) for _ in range(rng.randint(1, 8)))
                   for _ in range(rng.randint(1, 4))}
        pron, dist, _ = snap(decoded, allowed, seed=i)
        best = min(edit_distance(decoded, a) for a in allowed)
        if pron not in allowed or edit_distance(decoded, pron) != best or dist != best:
            bad += 1
    record_acceptance("snapping safety", bad == 0, f"{10_000 - bad}/10000 pairs")
    assert bad == 0


# lexicon --------------------------------------------------------------------------

def test_lexicon_round_trip(fixtures_dir):
    raw = (fixtures_dir / "lexicon_sample.txt").read_bytes()
    exact = serialize_lexicon(parse_lexicon(raw.decode("utf-8"))).encode("utf-8") == raw
    positioned = []
    for text, where in (("word\t(N1", (1, 6)), ("a\t(N1,a)\nword\t(N1a)", (2, 6)),
                        ("a\t(N1,a)\n\t(N1,b)", (2, 1))):
        try:
            parse_lexicon(text)
            positioned.append(False)
        except LexiconParseError as exc:
            positioned.append((exc.line, exc.column) == where)
    passed = exact and all(positioned)
    record_acceptance("lexicon round-trip", passed,
                      f"byte-exact={exact}; positioned errors {sum(positioned)}/3")
    assert passed


# ezafe labels ---------------------------------------------------------------------

def test_ezafe_label_derivation(fixtures_dir, persian):
    entries = parse_lexicon((fixtures_dir / "ezafe_contrast_lexicon.txt").read_text("utf-8"))
    corpus = parse_corpus((fixtures_dir / "ezafe_contrast_corpus.tsv").read_text("utf-8"))
    labels = tuple(x.label for x in derive_ezafe_labels(corpus, entries, persian).labels)
    out = synthlang.generate(synthlang.SynthSpec())
    synth = derive_ezafe_labels(parse_corpus(out.corpus), parse_lexicon(out.lexicon),
                                Alphabet.from_text(out.alphabet))
    passed = labels == (1, 0) and synth.underivable_count == 0
    record_acceptance("ezafe label derivation", passed,
                      f"contrast labels {labels}; synthlang underivable {synth.underivable_count}")
    assert passed


# synthetic reproduction -----------------------------------------------------------

@pytest.fixture(scope="module")
def reproduction():
    start = time.perf_counter()
    spec = synthlang.SynthSpec()
    out = synthlang.generate(spec)
    lang = out.language
    alphabet = Alphabet.from_text(out.alphabet)
    entries = parse_lexicon(out.lexicon)
    data = prepare(parse_corpus(out.corpus), entries, alphabet, parse_word_list(out.exceptions),
                   SEED)
    models, seconds = {}, {}
    for module in ("oov", "homograph", "ezafe-i", "ezafe-ii"):
        t = time.perf_counter()
        models[module] = train_module(module, data, SEED)
        seconds[module] = time.perf_counter() - t
    # the baseline gets as many optimiser steps as the three pipeline modules together
    budget = sum(default_config(m).steps for m in ("oov", "homograph", "ezafe-i"))
    t = time.perf_counter()
    models["e2e"] = train_module("e2e-transformer", data, SEED, {"steps": budget})
    seconds["e2e"] = time.perf_counter() - t
    return {"lang": lang, "data": data, "models": models, "seconds": seconds, "budget": budget,
            "start": start}


@pytest.mark.slow
def test_synthetic_reproduction(reproduction):
    r = reproduction
    lang, data, models = r["lang"], r["data"], r["models"]
    test = data.test
    labels = gold_labels(test, data.entries, data.alphabet)
    flat = [lab for sent in labels for lab in sent]
    m = {}

    # OOV: words the system has never seen, gold from the generating rules
    novel = synthlang.novel_words(lang, 1000, seed=1)
    hyp = models["oov"].predict_batch(novel)
    m["oov_exact"] = float(np.mean([h.pron == lang.table.apply(w) for h, w in zip(hyp, novel)]))

    # homographs in the held-out split, scored after snapping
    homographs = data.dicts.homographs
    idx = [i for i, lab in enumerate(flat) if lab.window.target in homographs]
    res = predict_homographs(models["homograph"], [flat[i].window for i in idx],
                             [homographs[flat[i].window.target] for i in idx], SEED)
    report = homograph_score([(flat[i].window.target, flat[i].base, x.pron)
                              for i, x in zip(idx, res)], homographs)
    m["homograph_accuracy"], m["homograph_score"] = report.accuracy, report.score
    m["homograph_n"] = len(idx)

    # ezafe: every held-out token, then tokens that are new words
    windows = [lab.window for lab in flat]
    gold = [lab.label for lab in flat]
    m["ezafe_i"] = ezafe_accuracy(models["ezafe-i"].predict(windows), gold).accuracy
    m["ezafe_ii"] = ezafe_accuracy(models["ezafe-ii"].predict(windows), gold).accuracy
    samples, new_words = synthlang.novel_sentences(lang, 1500, seed=3)
    rare_w, rare_g = [], []
    for s in samples:
        for win, g in zip(make_windows(s.graphemes), lang.ezafe_gold(list(s.graphemes))):
            if win.target in new_words:
                rare_w.append(win)
                rare_g.append(g)
    m["rare_ezafe_i"] = ezafe_accuracy(models["ezafe-i"].predict(rare_w), rare_g).accuracy
    m["rare_ezafe_ii"] = ezafe_accuracy(models["ezafe-ii"].predict(rare_w), rare_g).accuracy
    m["rare_n"] = len(rare_w)
    m["rare_majority"] = max(np.mean(rare_g), 1 - np.mean(rare_g))

    # full pipeline against the end-to-end baseline on the same held-out sentences
    system = build_system(data, models["oov"], models["homograph"], models["ezafe-i"],
                          Flags(seed=SEED))
    summary, _, _ = evaluate_system(system, test, labels)
    m["pipeline"] = summary["word_accuracy"]
    m["e2e"] = e2e_accuracy(models["e2e"], test)
    m["minutes"] = (time.perf_counter() - r["start"]) / 60

    checks = {
        "oov >= 0.95": m["oov_exact"] >= 0.95,
        "homograph accuracy >= 0.90": m["homograph_accuracy"] >= 0.90,
        "homograph score >= 0.85": m["homograph_score"] >= 0.85,
        "ezafe I >= 0.95": m["ezafe_i"] >= 0.95,
        "ezafe I > II on rare words": m["rare_ezafe_i"] > m["rare_ezafe_ii"],
        "pipeline >= 0.95": m["pipeline"] >= 0.95,
        "pipeline > e2e": m["pipeline"] > m["e2e"],
        f"<= {BUDGET_MINUTES} min": m["minutes"] <= BUDGET_MINUTES,
    }
    detail = (f"oov {m['oov_exact']:.4f}; homograph acc {m['homograph_accuracy']:.4f} "
              f"S {m['homograph_score']:.4f} (n={m['homograph_n']}); ezafe I {m['ezafe_i']:.4f} "
              f"II {m['ezafe_ii']:.4f}; rare-word ezafe I {m['rare_ezafe_i']:.4f} "
              f"II {m['rare_ezafe_ii']:.4f} (n={m['rare_n']}, majority "
              f"{m['rare_majority']:.4f}); pipeline {m['pipeline']:.4f} vs e2e {m['e2e']:.4f} "
              f"({r['budget']} steps); {m['minutes']:.1f} min")
    failed = [k for k, ok in checks.items() if not ok]
    record_acceptance("synthetic end-to-end reproduction", not failed,
                      detail + (f"; failed: {', '.join(failed)}" if failed else ""))
    print(json.dumps({k: (round(v, 6) if isinstance(v, float) else v) for k, v in m.items()},
                     sort_keys=True))
    print("train seconds", {k: round(v, 1) for k, v in r["seconds"].items()})
    assert not failed, failed


# routing contracts ----------------------------------------------------------------

@pytest.mark.slow
def test_routing_contracts(reproduction):
    data, models = reproduction["data"], reproduction["models"]
    sentences = [s.graphemes for s in data.test[:400]]
    extra = synthlang.novel_sentences(reproduction["lang"], 100, seed=5)[0]
    sentences += [s.graphemes for s in extra]
    seq = build_system(data, models["oov"], models["homograph"], models["ezafe-i"])
    par = build_system(data, models["oov"], models["homograph"], models["ezafe-i"],
                       Flags(parallel=True))
    dict_ok = homograph_ok = True
    expected = collections.Counter()
    same = True
    for words in sentences:
        a = seq.convert_words(words)
        b = par.convert_words(words)
        same &= a == b
        for r in a:
            if r.route == "dict":
                dict_ok &= (r.base.encode() == data.dicts.pron[r.token].encode()
                            and r.pron == apply_ezafe(r.base, r.ezafe, data.alphabet))
            elif r.route == "homograph":
                homograph_ok &= r.base in data.dicts.homographs[r.token]
            else:
                expected[r.token] += 1
    par.close()
    logged = {w: c for w, (_, c) in seq.oov_log.snapshot().items()}
    counts_ok = logged == dict(expected) and sum(expected.values()) > 0
    passed = dict_ok and homograph_ok and counts_ok and same
    record_acceptance("routing contracts", passed,
                      f"dict byte-equal={dict_ok}; homograph in allowed={homograph_ok}; "
                      f"OOV log exact={counts_ok} ({sum(expected.values())} OOV tokens); "
                      f"parallel == sequential={same}")
    assert passed


# determinism ----------------------------------------------------------------------

def test_determinism(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("seed = 5\nvocab_size = 80\nn_homographs = 3\nn_exceptions = 2\n"
                    "corpus_size = 300\n", encoding="utf-8")
    steps = {"oov": 10, "homograph": 5, "ezafe-i": 5, "ezafe-ii": 5, "e2e-transformer": 5,
             "e2e-gru": 3}
    runs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["synth", "--spec", str(spec), "--out", str(out)]) == 0
        manifest = str(out / "manifest.txt")
        for module, n in steps.items():
            assert main(["train", module, "--manifest", manifest, "--set",
                         f"{module}.steps={n}"]) == 0
        for ez in ("I", "II"):
            assert main(["eval", "--manifest", manifest, "--set", f"ezafe_model={ez}",
                         "--report", str(out / f"report-{ez}.jsonl"),
                         "--rows", str(out / f"rows-{ez}.tsv")]) == 0
        runs.append(out)
    a, b = runs
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    differ = [str(f) for f in files if (a / f).read_bytes() != (b / f).read_bytes()]
    n_ckpt = sum(1 for f in files if f.suffix == ".ckpt")
    passed = not differ and n_ckpt == len(steps)
    record_acceptance("determinism", passed,
                      f"{len(files)} files compared ({n_ckpt} checkpoints, 2 reports, 2 row dumps); "
                      f"differing: {differ or 'none'}")
    assert passed
