"""AUROC / FPR95 evaluation and the topic-transfer and mixture protocols."""

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .detectors import score_documents
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)


def _scores(values, name):
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} scores are empty")
    if np.isnan(arr).any():
        raise ValueError(f"{name} scores contain NaN")
    return arr


def auroc(machine_scores, human_scores):
    """P(machine > human) + 0.5 P(tie) over all cross-class pairs.

    Counts wins and ties with binary search over the sorted human scores,
    O((M + H) log H), and is exact: the numerator is a half-integer count.
    """
    m = _scores(machine_scores, "machine")
    h = np.sort(_scores(human_scores, "human"))
    below = np.searchsorted(h, m, side="left")
    at_or_below = np.searchsorted(h, m, side="right")
    wins = int(below.sum())
    ties = int((at_or_below - below).sum())
    return (wins + 0.5 * ties) / (m.size * h.size)


def fpr_at_tpr(machine_scores, human_scores, tpr=0.95, positive="machine"):
    """False-positive rate at the strictest threshold keeping recall >= ``tpr``.

    With ``positive="machine"`` the threshold is the largest observed machine
    score tau with #{machine >= tau} >= tpr * M, and the result is the
    fraction of human scores >= tau. ``positive="human"`` swaps the roles
    (humans are the positives, detected by *low* scores).
    """
    if not 0 < tpr <= 1:
        raise ValueError(f"tpr must be in (0, 1], got {tpr}")
    if positive == "human":
        return fpr_at_tpr(-_scores(human_scores, "human"), -_scores(machine_scores, "machine"), tpr)
    if positive != "machine":
        raise ValueError(f"positive must be 'machine' or 'human', got {positive!r}")
    m = np.sort(_scores(machine_scores, "machine"))[::-1]
    h = _scores(human_scores, "human")
    k = math.ceil(tpr * m.size - 1e-9)
    tau = m[k - 1]
    return float((h >= tau).sum()) / h.size


def subsample(items, k, seed):
    """Deterministic size-``k`` subset of ``items``, returned in input order."""
    items = list(items)
    if k >= len(items):
        return items
    keep = sorted(SplitMix64(seed).sample_indices(len(items), k))
    return [items[i] for i in keep]


@dataclass(frozen=True)
class EvaluationReport:
    detector: str
    config_hash: str
    backend_id: str
    human_topics: tuple
    machine_topics: tuple
    n_human: int
    n_machine: int
    auroc: float
    fpr95: float
    seed: int
    fpr_positive: str = "machine"

    def __post_init__(self):
        if not (0.0 <= self.auroc <= 1.0 and 0.0 <= self.fpr95 <= 1.0):
            raise ValueError("auroc and fpr95 must lie in [0, 1]")
        if self.n_human < 1 or self.n_machine < 1:
            raise ValueError("both classes need at least one document")

    def to_dict(self):
        d = asdict(self)
        d["human_topics"] = list(self.human_topics)
        d["machine_topics"] = list(self.machine_topics)
        return d


def _topics_of(docs):
    return tuple(sorted({d.topic for d in docs}))


def _by_id(docs):
    return sorted(docs, key=lambda d: d.id)


def score_table(documents, backend, config, perturber=None, jobs=1):
    """Map document id -> score for every document (deduplicated by id)."""
    unique = {d.id: d for d in documents}
    scored = score_documents(_by_id(unique.values()), backend, config, perturber, jobs)
    return {s.doc_id: s.score for s in scored}


def evaluate_pairing(config, backend, human_docs, machine_docs, seed, *, n=None,
                     perturber=None, jobs=1, scores=None, fpr_positive="machine",
                     human_topics=None, machine_topics=None):
    """AUROC and FPR95 on a class-balanced sample of human vs machine documents.

    The larger class (or both, when ``n`` caps them) is subsampled with a
    seeded SplitMix64 stream. ``scores`` may carry precomputed id -> score
    values so repeated pairings don't rescore documents.
    """
    human_docs = _by_id(human_docs)
    machine_docs = _by_id(machine_docs)
    if not human_docs:
        raise ValueError("no human documents to evaluate")
    if not machine_docs:
        raise ValueError("no machine documents to evaluate")
    k = min(len(human_docs), len(machine_docs))
    if n is not None:
        k = min(k, n)
    human_docs = subsample(human_docs, k, derive_seed(seed, "balance", "human"))
    machine_docs = subsample(machine_docs, k, derive_seed(seed, "balance", "machine"))
    if scores is None:
        scores = score_table(human_docs + machine_docs, backend, config, perturber, jobs)
    h = [scores[d.id] for d in human_docs]
    m = [scores[d.id] for d in machine_docs]
    return EvaluationReport(
        detector=config.name,
        config_hash=config.config_hash,
        backend_id=backend.backend_id,
        human_topics=tuple(human_topics) if human_topics else _topics_of(human_docs),
        machine_topics=tuple(machine_topics) if machine_topics else _topics_of(machine_docs),
        n_human=len(h),
        n_machine=len(m),
        auroc=auroc(m, h),
        fpr95=fpr_at_tpr(m, h, 0.95, fpr_positive),
        seed=seed,
        fpr_positive=fpr_positive,
    )


def split_by_topic(documents, origin):
    out = {}
    for d in documents:
        if d.origin == origin:
            out.setdefault(d.topic, []).append(d)
    return out


def transfer_matrix(config, backend, documents, topics=None, seed=0, *, machine_topics=None,
                    n=None, perturber=None, jobs=1, fpr_positive="machine"):
    """Cell (A, B): human documents of topic A against machine documents of topic B.

    ``topics`` names the human-side topics (rows); ``machine_topics`` the
    columns, defaulting to the same list. Returns ``{(A, B): EvaluationReport}``;
    the diagonal is the in-topic result.
    """
    human = split_by_topic(documents, "human")
    machine = split_by_topic(documents, "machine")
    rows = list(topics) if topics is not None else sorted(set(human) | set(machine))
    cols = list(machine_topics) if machine_topics is not None else rows
    if not rows or not cols:
        raise ValueError("transfer matrix needs at least one topic")
    for t in rows:
        if t not in human:
            raise ValueError(f"topic {t!r} has no human documents")
    for t in cols:
        if t not in machine:
            raise ValueError(f"topic {t!r} has no machine documents")
    pool = [d for t in rows for d in human[t]] + [d for t in cols for d in machine[t]]
    scores = score_table(pool, backend, config, perturber, jobs)
    return {(a, b): evaluate_pairing(config, backend, human[a], machine[b], seed, n=n,
                                     scores=scores, fpr_positive=fpr_positive)
            for a in rows for b in cols}


def _pool(by_topic, topics, origin, seed):
    missing = [t for t in topics if t not in by_topic]
    if missing:
        raise ValueError(f"topics {missing} have no {origin} documents")
    quota = min(len(by_topic[t]) for t in topics)
    pooled = []
    for t in sorted(topics):
        pooled += subsample(_by_id(by_topic[t]), quota, derive_seed(seed, "mixture", origin, t))
    return pooled


def mixture_eval(config, backend, documents, human_topics, machine_topics, seed=0, *,
                 n=None, perturber=None, jobs=1, scores=None, fpr_positive="machine"):
    """Evaluate pooled topics: equal per-topic quotas within each class, then balance."""
    human_topics = sorted(set(human_topics))
    machine_topics = sorted(set(machine_topics))
    if not human_topics or not machine_topics:
        raise ValueError("mixture needs at least one human topic and one machine topic")
    human = _pool(split_by_topic(documents, "human"), human_topics, "human", seed)
    machine = _pool(split_by_topic(documents, "machine"), machine_topics, "machine", seed)
    return evaluate_pairing(config, backend, human, machine, seed, n=n, perturber=perturber,
                            jobs=jobs, scores=scores, fpr_positive=fpr_positive,
                            human_topics=human_topics, machine_topics=machine_topics)


REPORT_FIELDS = ["detector", "config_hash", "backend_id", "human_topics", "machine_topics",
                 "n_human", "n_machine", "auroc", "fpr95", "seed", "fpr_positive"]


def reports_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for r in reports:
        row = r.to_dict()
        row["human_topics"] = "+".join(row["human_topics"])
        row["machine_topics"] = "+".join(row["machine_topics"])
        writer.writerow([repr(row[f]) if isinstance(row[f], float) else row[f]
                         for f in REPORT_FIELDS])
    return buf.getvalue()


def transfer_csv(matrix, metric="auroc"):
    """Square matrix: rows are human topics, columns machine topics."""
    rows = sorted({a for a, _ in matrix})
    cols = sorted({b for _, b in matrix})
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["human\\machine"] + cols)
    for a in rows:
        writer.writerow([a] + [repr(getattr(matrix[a, b], metric)) for b in cols])
    return buf.getvalue()


@dataclass(frozen=True)
class HistogramExport:
    metric: str
    label: str
    topic: str
    edges: list
    counts: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def export_score_distribution(scores_by_class, bins=30, metric="", topic=""):
    """Histograms on shared uniform edges plus per-class mean and std.

    Returns ``(histograms, summary)``. Identical scores everywhere produce a
    single unit-width bin centred on the value, with a warning.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    arrays = {label: _scores(v, label) for label, v in sorted(scores_by_class.items())}
    if not arrays:
        raise ValueError("no score classes given")
    union = np.concatenate(list(arrays.values()))
    lo, hi = float(union.min()), float(union.max())
    if lo == hi:
        log.warning("all %d scores equal %r; emitting one degenerate bin", union.size, lo)
        edges = np.array([lo - 0.5, lo + 0.5])
    else:
        edges = np.linspace(lo, hi, bins + 1)
    hists = []
    summary = {}
    for label, arr in arrays.items():
        counts, _ = np.histogram(arr, bins=edges)
        hists.append(HistogramExport(metric, label, topic, edges.tolist(), counts.tolist()))
        summary[label] = {"n": int(arr.size), "mean": float(arr.mean()), "std": float(arr.std())}
    return hists, summary


_COLORS = {"human": "#0072B2", "machine": "#D55E00"}


def histograms_to_svg(hists, title="", width=480, height=300):
    """Self-contained SVG overlaying each class's histogram (semi-transparent bars)."""
    pad = 40
    edges = hists[0].edges
    lo, hi = edges[0], edges[-1]
    top = max(max(h.counts) for h in hists) or 1
    sx = (width - 2 * pad) / (hi - lo)
    sy = (height - 2 * pad) / top
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
             f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>']
    for i, h in enumerate(hists):
        color = _COLORS.get(h.label, ["#009E73", "#CC79A7"][i % 2])
        for left, right, c in zip(h.edges[:-1], h.edges[1:], h.counts):
            if c == 0:
                continue
            x = pad + (left - lo) * sx
            w = (right - left) * sx
            parts.append(f'<rect x="{x:.2f}" y="{height - pad - c * sy:.2f}" width="{w:.2f}" '
                         f'height="{c * sy:.2f}" fill="{color}" fill-opacity="0.5"/>')
        parts.append(f'<text x="{width - pad}" y="{pad + 14 * i}" text-anchor="end" '
                     f'font-size="11" fill="{color}">{h.label}</text>')
    parts.append(f'<text x="{pad}" y="{height - pad + 16}" font-size="10">{lo:.3g}</text>')
    parts.append(f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="end" '
                 f'font-size="10">{hi:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
