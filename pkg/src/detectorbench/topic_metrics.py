"""Topic entropy of a human-authored dataset and its link to detectability."""

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

MODES = ("observed_nll", "shannon")


@dataclass(frozen=True)
class TopicEntropyReport:
    topic: str
    mode: str
    value: float
    n_documents: int
    n_tokens: int
    weighting: str = "token"

    def to_dict(self):
        return asdict(self)


def topic_entropy(backend, documents, mode="observed_nll", topic=None):
    """Token-weighted average uncertainty of ``backend`` over human documents.

    ``observed_nll`` averages -log P(actual token | prefix); ``shannon``
    averages the full predictive entropy at each position. Both pool every
    token of every document before averaging.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    documents = list(documents)
    if not documents:
        raise ValueError("topic entropy of an empty dataset is undefined")
    machine = [d.id for d in documents if d.origin != "human"]
    if machine:
        raise ValueError(f"topic entropy is defined over human documents only; got {machine}")
    total = 0.0
    n_tokens = 0
    for doc in documents:
        scoring = backend.score_text(doc.text)
        values = -scoring.log_probs if mode == "observed_nll" else scoring.entropies
        total += math.fsum(values)
        n_tokens += len(scoring)
    if n_tokens == 0:
        raise ValueError("documents contain no tokens")
    if topic is None:
        topics = sorted({d.topic for d in documents})
        topic = "+".join(topics)
    value = total / n_tokens + 0.0
    return TopicEntropyReport(topic, mode, value, len(documents), n_tokens)


def entropy_reports_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["topic", "mode", "value", "n_documents", "n_tokens", "weighting"])
    for r in reports:
        writer.writerow([r.topic, r.mode, repr(r.value), r.n_documents, r.n_tokens, r.weighting])
    return buf.getvalue()


class UndefinedCorrelationError(ValueError):
    pass


def _pearson(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    r = float((xc * yc).sum() / math.sqrt((xc * xc).sum() * (yc * yc).sum()))
    return max(-1.0, min(1.0, r))


def entropy_performance_correlation(pairs):
    """Pearson r and Spearman rho (average ranks for ties) over (entropy, metric) pairs."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError(f"need at least 3 (entropy, metric) pairs, got {len(pairs)}")
    arr = np.asarray(pairs, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise ValueError("correlation inputs must be finite")
    x, y = arr[:, 0], arr[:, 1]
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("correlation undefined: a coordinate has zero variance")
    return _pearson(x, y), _pearson(rankdata(x), rankdata(y))
