"""Datasets of human/machine documents: ingestion, counterparts, synthetic topics."""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ._io import atomic_write_json, atomic_write_jsonl
from .ngram import train_ngram
from .rng import SplitMix64, derive_seed
from .tokenizer import word_spans

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
ORIGINS = ("human", "machine")
MACHINE_SUFFIX = ".machine"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    id: str
    topic: str
    origin: str
    text: str
    provenance: dict = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DatasetError("document id must be a non-empty string")
        if not isinstance(self.topic, str) or not self.topic:
            raise DatasetError(f"document {self.id!r}: topic must be a non-empty string")
        if self.origin not in ORIGINS:
            raise DatasetError(f"document {self.id!r}: origin must be one of {ORIGINS}")
        if not isinstance(self.text, str) or not self.text.strip():
            raise DatasetError(f"document {self.id!r}: text is empty")
        if self.provenance is not None and not isinstance(self.provenance, dict):
            raise DatasetError(f"document {self.id!r}: provenance must be an object or null")
        if self.origin == "machine" and not self.provenance:
            raise DatasetError(f"machine document {self.id!r} has no provenance")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DatasetManifest:
    counts: dict
    format_version: int = FORMAT_VERSION

    @property
    def topics(self):
        return sorted(self.counts)

    @classmethod
    def from_documents(cls, documents):
        counts = {}
        for d in documents:
            by_origin = counts.setdefault(d.topic, {})
            by_origin[d.origin] = by_origin.get(d.origin, 0) + 1
        return cls({t: dict(sorted(c.items())) for t, c in sorted(counts.items())})

    def to_dict(self):
        return {"format_version": self.format_version, "topics": self.topics, "counts": self.counts}


def manifest_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


_FIELDS = ("id", "topic", "origin", "text", "provenance")


def load_dataset(path):
    """Read a JSON-lines dataset, strictly.

    Returns ``(documents, manifest)``. A sidecar manifest, when present, must
    agree with the file's contents.
    """
    path = Path(path)
    documents = []
    first_line = {}
    problems = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(row, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            missing = [f for f in _FIELDS if f not in row]
            extra = sorted(set(row) - set(_FIELDS))
            if missing or extra:
                raise DatasetError(f"{path}:{lineno}: missing fields {missing}, unknown fields {extra}")
            try:
                doc = Document(**row)
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if doc.id in first_line:
                problems.append(f"duplicate id {doc.id!r} on lines {first_line[doc.id]} and {lineno}")
            else:
                first_line[doc.id] = lineno
            documents.append(doc)
    if problems:
        raise DatasetError(f"{path}: " + "; ".join(problems))
    if not documents:
        raise DatasetError(f"{path}: no documents")
    manifest = DatasetManifest.from_documents(documents)
    sidecar = manifest_path(path)
    if sidecar.exists():
        declared = json.loads(sidecar.read_text(encoding="utf-8"))
        if declared.get("format_version") != FORMAT_VERSION:
            raise DatasetError(f"{sidecar}: unsupported format_version {declared.get('format_version')!r}")
        if declared.get("counts") != manifest.counts:
            raise DatasetError(f"{sidecar}: counts {declared.get('counts')} do not match "
                               f"file contents {manifest.counts}")
    return documents, manifest


def write_dataset(path, documents):
    """Atomically write documents plus the sidecar manifest."""
    documents = list(documents)
    ids = [d.id for d in documents]
    if len(set(ids)) != len(ids):
        raise DatasetError("document ids must be unique")
    manifest = DatasetManifest.from_documents(documents)
    atomic_write_jsonl(path, [d.to_dict() for d in documents])
    atomic_write_json(manifest_path(path), manifest.to_dict())
    return manifest


def _prompt_end(text, prompt_tokens, prompt_unit):
    """Character offset where the prompt ends, or None if ``text`` is too short."""
    if prompt_unit == "chars":
        return prompt_tokens if len(text) >= prompt_tokens + 5 else None
    spans = word_spans(text)
    if len(spans) < prompt_tokens + 5:
        return None
    return spans[prompt_tokens - 1][1]


def build_counterparts(backend, human_docs, prompt_tokens=30, max_tokens=100,
                       temperature=1.0, seed=0, prompt_unit="tokens"):
    """Continue the first ``prompt_tokens`` tokens of each human document.

    Machine text = the verbatim prompt + " " + the backend's continuation.
    Documents shorter than ``prompt_tokens + 5`` are skipped. Returns
    ``(machine_docs, skipped_ids)``.
    """
    if prompt_tokens < 1:
        raise ValueError(f"prompt_tokens must be >= 1, got {prompt_tokens}")
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
    if prompt_unit not in ("tokens", "chars"):
        raise ValueError(f"prompt_unit must be 'tokens' or 'chars', got {prompt_unit!r}")
    machine, skipped = [], []
    for doc in human_docs:
        end = _prompt_end(doc.text, prompt_tokens, prompt_unit)
        if end is None:
            skipped.append(doc.id)
            continue
        doc_seed = derive_seed(seed, doc.id)
        prompt = doc.text[:end]
        continuation = backend.generate(prompt, max_tokens, temperature, doc_seed)
        provenance = {
            "backend_id": backend.backend_id,
            "source_id": doc.id,
            "prompt_unit": prompt_unit,
            "prompt_length": prompt_tokens,
            "max_tokens": max_tokens,
            "temperature": temperature,
            "base_seed": seed,
            "seed": doc_seed,
        }
        text = prompt + " " + continuation if continuation else prompt
        machine.append(Document(doc.id + MACHINE_SUFFIX, doc.topic, "machine", text, provenance))
    if skipped:
        log.info("skipped %d documents shorter than the prompt: %s", len(skipped), skipped)
    if not machine:
        raise ValueError(f"every document was shorter than {prompt_tokens} + 5 {prompt_unit}")
    return machine, skipped


def regenerate(backend, human_doc, provenance):
    """Recreate a machine document's text from its provenance record."""
    if provenance["backend_id"] != backend.backend_id:
        raise ValueError(f"provenance names backend {provenance['backend_id']!r}, "
                         f"got {backend.backend_id!r}")
    end = _prompt_end(human_doc.text, provenance["prompt_length"], provenance["prompt_unit"])
    prompt = human_doc.text[:end]
    continuation = backend.generate(prompt, provenance["max_tokens"],
                                    provenance["temperature"], provenance["seed"])
    return prompt + " " + continuation if continuation else prompt


# synthetic topics

_ONSETS = "b c d f g h k l m n p r s t v z".split() + ["br", "ch", "st", "tr", "sh"]
_VOWELS = "a e i o u ai ou".split()


def pseudo_words(n, seed):
    """``n`` distinct pronounceable lowercase pseudo-words."""
    rng = SplitMix64(seed)
    words = []
    seen = set()
    while len(words) < n:
        syllables = 1 + rng.randbelow(3)
        w = "".join(_ONSETS[rng.randbelow(len(_ONSETS))] + _VOWELS[rng.randbelow(len(_VOWELS))]
                    for _ in range(syllables))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def markov_text(seed, n_words=20000, vocab_size=80, branching=8, zipf=1.0):
    """Text from a random sparse first-order Markov chain over pseudo-words.

    Each word gets ``branching`` successors with Zipf-shaped weights, so the
    chain has a clear but not deterministic preferred next word.
    """
    rng = SplitMix64(derive_seed(seed, "chain"))
    words = pseudo_words(vocab_size, derive_seed(seed, "words"))
    weights = [1.0 / (r + 1) ** zipf for r in range(branching)]
    successors = [rng.sample_indices(vocab_size, branching) for _ in range(vocab_size)]
    state = 0
    out = []
    for _ in range(n_words):
        out.append(words[state])
        state = successors[state][rng.choice(weights)]
    return " ".join(out)


@dataclass(frozen=True)
class TopicSpec:
    name: str
    base_text: str = field(repr=False)
    temperature: float
    n_docs: int
    doc_length: int

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"topic {self.name!r}: temperature must be >= 0")
        if self.n_docs < 1:
            raise ValueError(f"topic {self.name!r}: doc count must be >= 1, got {self.n_docs}")
        if not self.base_text.strip():
            raise ValueError(f"topic {self.name!r}: base text is empty")


def default_topic_specs(n_docs=100, doc_length=40, seed=0,
                        temperatures=(0.3, 0.7, 1.2), names=("low", "mid", "high"),
                        base_words=20000):
    """One synthetic topic per temperature, each over its own Markov chain."""
    return [TopicSpec(name, markov_text(derive_seed(seed, "base", name), base_words), t,
                      n_docs, doc_length)
            for name, t in zip(names, temperatures)]


def train_evaluation_backend(specs, order=2, delta=0.1):
    """Shared scoring model over every topic's base text."""
    return train_ngram([s.base_text for s in specs], order=order, delta=delta)


def synth_topics(specs, backend, master_seed=0, prompt_tokens=30,
                 machine_temperature=0.0, order=2, private_delta=0.001):
    """Human and machine documents for each synthetic topic.

    Human documents are sampled at the topic's temperature from a private
    model of the topic's base text (lightly smoothed, so human samples
    rarely wander off the topic's chain). Machine documents are ``backend``
    continuations of their first ``prompt_tokens`` tokens.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one topic spec")
    documents = []
    for spec in specs:
        if spec.doc_length < prompt_tokens + 5:
            raise ValueError(f"topic {spec.name!r}: doc_length {spec.doc_length} is below "
                             f"prompt_tokens + 5 = {prompt_tokens + 5}")
        private = train_ngram([spec.base_text], order=order, delta=private_delta)
        human = [Document(f"{spec.name}-{i:04d}", spec.name, "human",
                          private.generate("", spec.doc_length, spec.temperature,
                                           derive_seed(master_seed, spec.name, "human", i)))
                 for i in range(spec.n_docs)]
        machine, _ = build_counterparts(backend, human, prompt_tokens,
                                        spec.doc_length - prompt_tokens, machine_temperature,
                                        derive_seed(master_seed, spec.name, "machine"))
        documents += human + machine
    return documents
