"""Additively smoothed n-gram language model used as the built-in backend.

Small, exact and deterministic: every probability is a ratio of integer
counts, so test expectations can be worked out by hand.
"""

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, content_hash
from .rng import SplitMix64
from .scoring import SequenceScoring
from .tokenizer import Vocabulary, detokenize, tokenize, word_tokenize

FORMAT_NAME = "detectorbench-ngram"
FORMAT_VERSION = 1


class ZeroMassContextError(ValueError):
    """Context never seen in training and ``delta == 0``: no distribution exists."""


@dataclass(frozen=True)
class _Row:
    probs: np.ndarray
    log_probs: np.ndarray
    ranks: np.ndarray  # competition rank of every token id
    entropy: float


def competition_ranks(probs):
    """1 + number of tokens with strictly greater probability, for every token."""
    ordered = np.sort(probs)
    greater = len(probs) - np.searchsorted(ordered, probs, side="right")
    return (greater + 1).astype(np.int64)


def shannon_entropy(probs):
    """Entropy in nats, clamped to the valid range [0, ln|V|]."""
    p = probs[probs > 0]
    h = float(-(p * np.log(p)).sum())
    if h <= 0.0:
        return 0.0  # also normalizes -0.0 from a point mass
    return min(h, math.log(len(probs)))


class NGramModel:
    """Order-``n`` model: P(w | last n-1 tokens) = (c + delta) / (C + delta |V|).

    Contexts are left-padded with the vocabulary's BOS id so the first token
    of every sequence gets a prediction. Instances are immutable once built;
    the per-context row cache is the only mutable state and is filled
    idempotently, so concurrent scoring is safe.
    """

    def __init__(self, order, vocabulary, counts, delta=0.1):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if delta < 0 or not math.isfinite(delta):
            raise ValueError(f"delta must be finite and >= 0, got {delta}")
        self.order = int(order)
        self.vocabulary = vocabulary
        self.delta = float(delta)
        self.counts = {tuple(ctx): dict(nexts) for ctx, nexts in counts.items()}
        for nexts in self.counts.values():
            if any(c < 0 for c in nexts.values()):
                raise ValueError("counts must be non-negative")
        self._rows = {}
        self._fingerprint = None

    @property
    def vocab_size(self):
        return len(self.vocabulary)

    @property
    def backend_id(self):
        if self._fingerprint is None:
            self._fingerprint = content_hash(self.to_dict())
        return f"ngram-{self._fingerprint}"

    def context_key(self, context):
        """Last ``order - 1`` ids of ``context``, BOS-padded on the left."""
        width = self.order - 1
        if width == 0:
            return ()
        context = list(context)[-width:]
        return tuple([self.vocabulary.bos_id] * (width - len(context)) + context)

    def _row(self, key):
        row = self._rows.get(key)
        if row is None:
            row = self._build_row(key)
            self._rows[key] = row
        return row

    def _build_row(self, key):
        V = self.vocab_size
        counts = np.zeros(V, dtype=np.float64)
        for tok, c in self.counts.get(key, {}).items():
            counts[tok] = c
        total = counts.sum() + self.delta * V
        if total == 0:
            raise ZeroMassContextError(
                f"context {self.vocabulary.decode(key)} has no counts and delta is 0")
        probs = (counts + self.delta) / total
        with np.errstate(divide="ignore"):
            log_probs = np.log(probs)
        return _Row(probs, log_probs, competition_ranks(probs), shannon_entropy(probs))

    def next_distribution(self, context):
        """Probability vector over the vocabulary for the token after ``context``."""
        return self._row(self.context_key(context)).probs.copy()

    def score_sequence(self, tokens):
        tokens = [int(t) for t in tokens]
        if not tokens:
            raise ValueError("cannot score an empty token sequence")
        n = len(tokens)
        log_probs = np.empty(n)
        ranks = np.empty(n, dtype=np.int64)
        entropies = np.empty(n)
        for t, tok in enumerate(tokens):
            row = self._row(self.context_key(tokens[:t]))
            log_probs[t] = row.log_probs[tok]
            ranks[t] = row.ranks[tok]
            entropies[t] = row.entropy
        return SequenceScoring(tokens, log_probs, ranks, entropies)

    def sample_continuation(self, prompt, max_tokens, temperature=1.0, seed=0):
        """Sample ``max_tokens`` ids after ``prompt`` (prompt not included).

        Temperature 0 is greedy decoding with ties going to the smallest id.
        The BOS and unknown tokens are never emitted.
        """
        if max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
        if temperature < 0 or not math.isfinite(temperature):
            raise ValueError(f"temperature must be finite and >= 0, got {temperature}")
        rng = SplitMix64(seed)
        history = [int(t) for t in prompt]
        out = []
        specials = [self.vocabulary.bos_id, self.vocabulary.unk_id]
        for _ in range(max_tokens):
            row = self._row(self.context_key(history))
            if temperature == 0:
                probs = row.probs.copy()
                probs[specials] = -1.0
                tok = int(np.argmax(probs))
            else:
                logits = row.log_probs / temperature
                logits[specials] = -np.inf
                finite = logits[np.isfinite(logits)]
                if finite.size == 0:
                    raise ZeroMassContextError("no emittable token has probability mass")
                weights = np.exp(logits - finite.max())
                tok = rng.choice(weights)
            history.append(tok)
            out.append(tok)
        return out

    # text-level backend interface

    def tokenize(self, text):
        return tokenize(text, self.vocabulary)

    def detokenize(self, ids):
        return detokenize(ids, self.vocabulary)

    def score_text(self, text):
        """Like ``score_sequence`` but with token strings, as remote backends report them."""
        s = self.score_sequence(self.tokenize(text))
        return SequenceScoring(self.vocabulary.decode(s.tokens), s.log_probs, s.ranks, s.entropies)

    def generate(self, prompt, max_tokens, temperature=1.0, seed=0):
        ids = self.sample_continuation(self.tokenize(prompt), max_tokens, temperature, seed)
        return self.detokenize(ids)

    # serialization

    def to_dict(self):
        counts = [[list(ctx), sorted(nexts.items())]
                  for ctx, nexts in sorted(self.counts.items())]
        return {
            "format": FORMAT_NAME,
            "format_version": FORMAT_VERSION,
            "order": self.order,
            "delta": self.delta,
            "vocabulary": self.vocabulary.tokens,
            "unk": self.vocabulary.unk,
            "bos": self.vocabulary.bos,
            "counts": counts,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != FORMAT_NAME:
            raise ValueError(f"not a {FORMAT_NAME} file")
        if data.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {data.get('format_version')!r}")
        vocab = Vocabulary(data["vocabulary"], unk=data["unk"], bos=data["bos"])
        counts = {tuple(ctx): {int(t): int(c) for t, c in nexts}
                  for ctx, nexts in data["counts"]}
        return cls(data["order"], vocab, counts, data["delta"])

    def save(self, path):
        atomic_write_text(path, json.dumps(self.to_dict(), separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _as_words(item):
    if isinstance(item, str):
        return word_tokenize(item)
    return list(item)


def train_ngram(corpus, order=2, delta=0.1, vocabulary=None):
    """Count n-grams over ``corpus`` (texts or token-string sequences).

    The vocabulary defaults to every token in the corpus, sorted.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    sequences = [_as_words(item) for item in corpus]
    sequences = [s for s in sequences if s]
    if not sequences:
        raise ValueError("cannot train on an empty corpus")
    if vocabulary is None:
        vocabulary = Vocabulary.from_texts(sequences)
    width = order - 1
    counts = defaultdict(Counter)
    for words in sequences:
        ids = vocabulary.encode(words)
        padded = [vocabulary.bos_id] * width + ids
        for t, tok in enumerate(ids):
            counts[tuple(padded[t:t + width])][tok] += 1
    return NGramModel(order, vocabulary, counts, delta)
