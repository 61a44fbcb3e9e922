"""Per-token scoring records shared by every backend and detector."""

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np


@dataclass(frozen=True)
class TokenScore:
    position: int
    token: object
    log_prob: float
    rank: int
    entropy: float


def check_token_score(log_prob, rank, entropy, vocab_size=None):
    """Raise ``ValueError`` if a (log_prob, rank, entropy) triple is impossible."""
    if not math.isfinite(log_prob) or log_prob > 0.0:
        raise ValueError(f"log_prob must be finite and <= 0, got {log_prob!r}")
    if isinstance(rank, bool) or int(rank) != rank or rank < 1:
        raise ValueError(f"rank must be an integer >= 1, got {rank!r}")
    if not math.isfinite(entropy) or entropy < 0.0:
        raise ValueError(f"entropy must be finite and >= 0, got {entropy!r}")
    if vocab_size is not None:
        if rank > vocab_size:
            raise ValueError(f"rank {rank} exceeds vocabulary size {vocab_size}")
        if entropy > math.log(vocab_size) + 1e-9:
            raise ValueError(f"entropy {entropy} exceeds ln|V| for |V|={vocab_size}")


class SequenceScoring:
    """Token-level (log_prob, rank, entropy) for one scored sequence.

    Stored column-wise as numpy arrays; index or iterate to get
    :class:`TokenScore` records.
    """

    def __init__(self, tokens, log_probs, ranks, entropies):
        self.tokens = tuple(tokens)
        self.log_probs = np.asarray(log_probs, dtype=np.float64)
        self.ranks = np.asarray(ranks, dtype=np.int64)
        self.entropies = np.asarray(entropies, dtype=np.float64)
        n = len(self.tokens)
        if not (len(self.log_probs) == len(self.ranks) == len(self.entropies) == n):
            raise ValueError("scoring columns must all have one entry per token")

    @classmethod
    def from_scores(cls, scores: Sequence[TokenScore]):
        return cls([s.token for s in scores], [s.log_prob for s in scores],
                   [s.rank for s in scores], [s.entropy for s in scores])

    def __len__(self):
        return len(self.tokens)

    def __getitem__(self, t):
        return TokenScore(t, self.tokens[t], float(self.log_probs[t]),
                          int(self.ranks[t]), float(self.entropies[t]))

    def __iter__(self):
        return (self[t] for t in range(len(self)))

    def __eq__(self, other):
        # bitwise comparison: arrays must match exactly, not approximately
        return (isinstance(other, SequenceScoring)
                and self.tokens == other.tokens
                and self.log_probs.tobytes() == other.log_probs.tobytes()
                and self.ranks.tobytes() == other.ranks.tobytes()
                and self.entropies.tobytes() == other.entropies.tobytes())

    def __repr__(self):
        return f"SequenceScoring(n={len(self)}, mean_log_prob={self.log_probs.mean() if len(self) else float('nan'):.4f})"

    def to_json(self):
        return {"tokens": list(self.tokens),
                "scores": [{"log_prob": float(lp), "rank": int(r), "entropy": float(h)}
                           for lp, r, h in zip(self.log_probs, self.ranks, self.entropies)]}

    @classmethod
    def from_json(cls, obj):
        scores = obj["scores"]
        return cls(obj["tokens"], [s["log_prob"] for s in scores], [s["rank"] for s in scores],
                   [s["entropy"] for s in scores])


class ScoringBackend(Protocol):
    """Anything that can score and continue text.

    Implemented by :class:`detectorbench.ngram.NGramModel` and
    :class:`detectorbench.remote.RemoteBackend`.
    """

    backend_id: str

    def score_text(self, text: str) -> SequenceScoring: ...

    def generate(self, prompt: str, max_tokens: int, temperature: float, seed: int) -> str: ...
