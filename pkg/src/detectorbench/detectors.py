"""Zero-shot detection statistics.

Every detector maps a document to a scalar oriented so that higher means
"more likely machine-generated"; AUROC can then be computed the same way for
all of them.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ._io import atomic_write_jsonl, content_hash
from .ngram import NGramModel
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)

KINDS = ("logp", "rank", "logrank", "entropy", "detectgpt")


class DocumentScoringError(RuntimeError):
    def __init__(self, doc_id, cause):
        super().__init__(f"failed to score document {doc_id!r}: {cause}")
        self.doc_id = doc_id


@dataclass(frozen=True)
class DetectorConfig:
    kind: str
    p: int = 10
    mask_fraction: float = 0.15
    span_length: int = 2
    normalize: bool = True
    seed: int = 0
    flip: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown detector {self.kind!r}; expected one of {KINDS}")
        if self.kind == "detectgpt" and self.p < 1:
            raise ValueError(f"detectgpt needs at least one perturbation, got p={self.p}")
        if not 0 < self.mask_fraction < 1:
            raise ValueError(f"mask_fraction must be in (0, 1), got {self.mask_fraction}")
        if self.span_length < 1:
            raise ValueError(f"span_length must be >= 1, got {self.span_length}")

    def to_dict(self):
        if self.kind != "detectgpt":
            # perturbation knobs are irrelevant and must not split the hash
            return {"kind": self.kind, "flip": self.flip}
        return asdict(self)

    @property
    def config_hash(self):
        return content_hash(self.to_dict())

    @property
    def name(self):
        base = f"detectgpt_p{self.p}" if self.kind == "detectgpt" else self.kind
        return base + ("_flip" if self.flip else "")


@dataclass(frozen=True)
class DocumentScore:
    doc_id: str
    detector: str
    score: float
    n_tokens: int
    config_hash: str = ""
    backend_id: str = ""

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValueError(f"non-finite score {self.score} for {self.doc_id!r}")
        if self.n_tokens < 1:
            raise ValueError(f"document {self.doc_id!r} has no scored tokens")


def _nonempty(scoring):
    if len(scoring) == 0:
        raise ValueError("cannot compute a statistic over an empty scoring")
    return scoring


def logp_statistic(scoring):
    """Mean per-token log-probability."""
    return float(np.mean(_nonempty(scoring).log_probs))


def rank_statistic(scoring):
    """Negated mean token rank."""
    return -float(np.mean(_nonempty(scoring).ranks))


def logrank_statistic(scoring):
    """Negated mean log-rank."""
    return -float(np.mean(np.log(_nonempty(scoring).ranks)))


def entropy_statistic(scoring):
    """Mean predictive entropy (higher = machine unless the config flips it)."""
    return float(np.mean(_nonempty(scoring).entropies))


STATISTICS = {
    "logp": logp_statistic,
    "rank": rank_statistic,
    "logrank": logrank_statistic,
    "entropy": entropy_statistic,
}


def span_count(n_tokens, mask_fraction, span_length):
    """round(fraction * n / span) with half-up rounding, clamped to [1, n // span]."""
    raw = mask_fraction * n_tokens / span_length
    n_spans = max(1, math.floor(raw + 0.5 + 1e-9))
    return min(n_spans, n_tokens // span_length)


def perturb_spans(tokens, mask_fraction, span_length, backend, seed):
    """Resample random non-overlapping spans from ``backend`` given left context.

    The number of spans follows :func:`span_count`; span positions are drawn
    uniformly over all non-overlapping layouts. Length is preserved.
    """
    tokens = [int(t) for t in tokens]
    if span_length < 1:
        raise ValueError(f"span_length must be >= 1, got {span_length}")
    if not 0 < mask_fraction < 1:
        raise ValueError(f"mask_fraction must be in (0, 1), got {mask_fraction}")
    n = len(tokens)
    if n < span_length:
        raise ValueError(f"document of {n} tokens is shorter than one span ({span_length})")
    rng = SplitMix64(seed)
    n_spans = span_count(n, mask_fraction, span_length)
    free = n - n_spans * span_length
    # stars and bars: place n_spans blocks among `free` untouched tokens
    slots = sorted(rng.sample_indices(free + n_spans, n_spans))
    starts = [slot + k * (span_length - 1) for k, slot in enumerate(slots)]
    out = list(tokens)
    for start in starts:
        fill = backend.sample_continuation(out[:start], span_length, 1.0, rng.next_u64())
        out[start:start + span_length] = fill
    return out


class SpanPerturber:
    """Built-in perturbation source for the n-gram backend.

    Only left context conditions each replacement, so this is weaker than
    mask-filling with a bidirectional model.
    """

    def __init__(self, model, mask_fraction=0.15, span_length=2):
        self.model = model
        self.mask_fraction = mask_fraction
        self.span_length = span_length

    def perturb(self, text, count, seed):
        ids = self.model.tokenize(text)
        return [self.model.detokenize(perturb_spans(ids, self.mask_fraction, self.span_length,
                                                    self.model, derive_seed(seed, i)))
                for i in range(count)]


class IdentityPerturber:
    def perturb(self, text, count, seed):
        return [text] * count


def default_perturber(backend, config):
    if isinstance(backend, NGramModel):
        return SpanPerturber(backend, config.mask_fraction, config.span_length)
    make = getattr(backend, "perturber", None)
    if make is None:
        raise TypeError(f"no perturber available for backend {type(backend).__name__}")
    return make(config.mask_fraction, config.span_length)


def detectgpt_statistic(backend, perturber, text, config, doc_id="", original=None):
    """Log-probability drop from ``text`` to its perturbations.

    ``mean_logp(text) - mean_i mean_logp(perturbation_i)``, divided by the
    (population) std of the perturbed values plus 1e-6 when
    ``config.normalize`` is set. Pass the text's scoring as ``original`` to
    skip rescoring it.
    """
    if config.p < 1:
        raise ValueError(f"detectgpt needs at least one perturbation, got p={config.p}")
    if original is None:
        original = backend.score_text(text)
    original = logp_statistic(original)
    perturbed = perturber.perturb(text, config.p, derive_seed(config.seed, doc_id))
    if all(t == text for t in perturbed):
        log.warning("all %d perturbations of %r equal the original; score is 0", config.p, doc_id)
        return 0.0
    values = np.array([logp_statistic(backend.score_text(t)) for t in perturbed])
    d = original - float(values.mean())
    if config.normalize:
        d /= float(values.std()) + 1e-6
    return d


def score_document(doc_id, text, backend, config, perturber=None):
    scoring = backend.score_text(text)
    if config.kind == "detectgpt":
        if perturber is None:
            perturber = default_perturber(backend, config)
        score = detectgpt_statistic(backend, perturber, text, config, doc_id, scoring)
    else:
        score = STATISTICS[config.kind](scoring)
    if config.flip:
        score = -score
    return DocumentScore(doc_id, config.name, score + 0.0, len(scoring),
                         config.config_hash, backend.backend_id)


def score_documents(documents, backend, config, perturber=None, jobs=1):
    """Score documents (anything with ``.id`` and ``.text``), preserving order.

    Any failure aborts with :class:`DocumentScoringError` naming the document.
    """
    if config.kind == "detectgpt" and perturber is None:
        perturber = default_perturber(backend, config)

    def one(doc):
        try:
            return score_document(doc.id, doc.text, backend, config, perturber)
        except Exception as exc:
            raise DocumentScoringError(doc.id, exc) from exc

    if jobs <= 1:
        return [one(d) for d in documents]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, documents))


def write_scores(path, scores):
    """JSON lines dump, one DocumentScore per line, sorted by document id."""
    atomic_write_jsonl(path, [asdict(s) for s in sorted(scores, key=lambda s: s.doc_id)])
