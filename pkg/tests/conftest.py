"""Shared fixtures and the acceptance-summary terminal hook."""

import numpy as np
import pytest
from hypothesis import settings

from repunct.corpus import LabeledCorpus, PunctLabel
from repunct.subword import train_vocab

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# Populated by tests/test_acceptance.py; printed after the test summary so
# the one-line-per-criterion verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, name: str, ok: bool, detail: str) -> None:
        word = "PASS" if ok else "FAIL"
        line = f"[criterion {number}] {name}: {word} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


@pytest.fixture(scope="session")
def tiny_corpus() -> LabeledCorpus:
    """Four short sentences, all three punctuation classes present."""
    entries = []
    sents = [
        ([("the", "O"), ("cat", "O"), ("sat", "PERIOD")]),
        ([("it", "O"), ("was", "O"), ("warm", "COMMA"), ("too", "PERIOD")]),
        ([("did", "O"), ("it", "O"), ("purr", "QUESTION")]),
        ([("yes", "COMMA"), ("loudly", "PERIOD")]),
    ]
    for sent in sents:
        for word, name in sent:
            entries.append((word, PunctLabel[name]))
    return LabeledCorpus(tuple(entries))


@pytest.fixture(scope="session")
def repeat_corpus() -> LabeledCorpus:
    """Heavy word repetition so merges reach whole-word pieces."""
    words = ["hello", "world", "held", "hold"] * 40
    entries = tuple((w, PunctLabel.O) for w in words)
    return LabeledCorpus(entries)


@pytest.fixture(scope="session")
def repeat_vocab(repeat_corpus):
    return train_vocab(repeat_corpus, vocab_size=60)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
