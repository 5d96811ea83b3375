import pathlib

import pytest

from mmg2p import synthlang
from mmg2p.experiment import prepare, train_module
from mmg2p.lexicon import parse_corpus, parse_lexicon, parse_word_list
from mmg2p.text import Alphabet

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

# lines reported by test_acceptance, printed once at the end of the run
ACCEPTANCE_LINES = []


def record_acceptance(name: str, passed: bool, detail: str = ""):
    line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def persian():
    return Alphabet.persian()


# a small synthetic language that trains in seconds
TINY_SPEC = synthlang.SynthSpec(seed=3, vocab_size=60, n_homographs=3, n_exceptions=2,
                                corpus_size=300, max_sentence=6)


@pytest.fixture(scope="session")
def tiny_synth():
    return synthlang.generate(TINY_SPEC)


@pytest.fixture(scope="session")
def tiny_data(tiny_synth):
    alphabet = Alphabet.from_text(tiny_synth.alphabet)
    entries = parse_lexicon(tiny_synth.lexicon)
    corpus = parse_corpus(tiny_synth.corpus)
    return prepare(corpus, entries, alphabet, parse_word_list(tiny_synth.exceptions), seed=0)


@pytest.fixture(scope="session")
def tiny_models(tiny_data):
    """Barely trained modules: enough for routing contracts, not for accuracy."""
    steps = {"oov": 20, "homograph": 20, "ezafe-i": 20}
    return {m: train_module(m, tiny_data, 0, {"steps": n}) for m, n in steps.items()}
