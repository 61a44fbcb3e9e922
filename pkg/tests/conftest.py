import numpy as np
import pytest

from detectorbench.corpus import default_topic_specs, synth_topics, train_evaluation_backend
from detectorbench.ngram import NGramModel, train_ngram
from detectorbench.scoring import SequenceScoring


@pytest.fixture
def alternating():
    """Bigram over "a b a b a b" with no smoothing: P(b|a) = P(a|b) = 1."""
    return train_ngram(["a b a b a b"], order=2, delta=0.0)


@pytest.fixture(scope="session")
def synthetic():
    """The default three-topic corpus (100 docs per class per topic)."""
    specs = default_topic_specs(seed=0)
    backend = train_evaluation_backend(specs)
    return backend, synth_topics(specs, backend, 0)


class TableBackend:
    """Backend whose mean log-prob per text is looked up in a table."""

    backend_id = "table"

    def __init__(self, table):
        self.table = table

    def score_text(self, text):
        lp = self.table[text]
        return SequenceScoring([text], [lp], [1], [0.0])


class ListPerturber:
    def __init__(self, texts):
        self.texts = texts

    def perturb(self, text, count, seed):
        return list(self.texts[:count])


def random_model(rng, vocab_size, order, delta, n_words=400):
    words = [f"w{i}" for i in range(vocab_size - 2)]
    corpus = [" ".join(rng.choice(words, size=n_words))]
    return train_ngram(corpus, order=order, delta=delta)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
