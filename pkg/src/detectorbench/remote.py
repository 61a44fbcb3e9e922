"""HTTP client for an external scoring service.

The server computes log-prob, rank and entropy per token, so no vocabulary-
sized vectors cross the wire. Every response is validated before use and
cached on disk by content hash, which makes warm-cache reruns free and
bit-reproducible.

Wire protocol (JSON over HTTP, all fields required)::

    POST /v1/score    {"model", "text"}
                   -> {"model", "tokens": [str], "scores": [{"log_prob", "rank", "entropy"}]}
    POST /v1/generate {"model", "prompt", "max_tokens", "temperature", "seed"} -> {"text"}
    POST /v1/perturb  {"model", "text", "mask_fraction", "span_length", "count"} -> {"texts": [str]}

Errors come back as non-200 with ``{"error": str}``; 409 means the server
does not serve the requested model.
"""

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import httpx

from ._io import atomic_write_text, canonical_json
from .scoring import SequenceScoring, check_token_score

log = logging.getLogger(__name__)

ENDPOINT_ENV = "DETECTORBENCH_ENDPOINT"
TOKEN_ENV = "DETECTORBENCH_TOKEN"


class RemoteError(RuntimeError):
    pass


class TransportError(RemoteError):
    """The service could not be reached, even after retries."""


class ProtocolError(RemoteError):
    """The service answered with something that violates the wire contract."""


class ConfigurationError(RemoteError):
    """The service is serving a different model than the one requested."""


class RequestRejected(RemoteError):
    """The service refused the request (4xx)."""


def _excerpt(payload, limit=200):
    text = payload if isinstance(payload, str) else json.dumps(payload)[:limit + 1]
    return text if len(text) <= limit else text[:limit] + "..."


@dataclass(frozen=True)
class RemoteEndpoint:
    base_url: str
    model: str
    top_k: int = 0
    timeout: float = 30.0
    max_in_flight: int = 4
    max_attempts: int = 3
    backoff_base: float = 0.5
    token: str = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")

    @classmethod
    def from_env(cls, model, base_url=None, **kwargs):
        """Endpoint falling back to ``$DETECTORBENCH_ENDPOINT`` / ``$DETECTORBENCH_TOKEN``."""
        base_url = base_url or os.environ.get(ENDPOINT_ENV)
        if not base_url:
            raise ValueError(f"no endpoint given and ${ENDPOINT_ENV} is unset")
        kwargs.setdefault("token", os.environ.get(TOKEN_ENV))
        return cls(base_url, model, **kwargs)


class ResponseCache:
    """Content-addressed on-disk cache: one JSON line per file, atomic writes."""

    def __init__(self, root):
        self.root = Path(root)

    def _path(self, key):
        return self.root / key[:2] / f"{key}.jsonl"

    def get(self, key):
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["response"]

    def put(self, key, request, response):
        atomic_write_text(self._path(key),
                          canonical_json({"key": key, "request": request, "response": response}) + "\n")


class RemoteBackend:
    """Scoring backend backed by a remote service; safe to share across threads."""

    def __init__(self, endpoint, cache_dir=None, transport=None):
        self.endpoint = endpoint
        self.cache = ResponseCache(cache_dir) if cache_dir is not None else None
        headers = {"Authorization": f"Bearer {endpoint.token}"} if endpoint.token else {}
        self._client = httpx.Client(base_url=endpoint.base_url.rstrip("/"), headers=headers,
                                    timeout=endpoint.timeout, transport=transport)
        self._slots = threading.BoundedSemaphore(endpoint.max_in_flight)
        self.network_calls = 0
        self._count_lock = threading.Lock()
        self.warnings = []

    @property
    def backend_id(self):
        return f"remote-{self.endpoint.model}"

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _request(self, path, payload):
        request = {"model": self.endpoint.model, **payload}
        key = hashlib.sha256(canonical_json({"path": path, **request}).encode("utf-8")).hexdigest()
        if self.cache is not None:
            cached = self.cache.get(key)
            if cached is not None:
                return cached
        response = self._post(path, request)
        if self.cache is not None:
            self.cache.put(key, request, response)
        return response

    def _post(self, path, request):
        last = None
        for attempt in range(self.endpoint.max_attempts):
            if attempt:
                time.sleep(self.endpoint.backoff_base * 2 ** (attempt - 1))
            with self._slots:
                with self._count_lock:
                    self.network_calls += 1
                try:
                    resp = self._client.post(path, json=request)
                except httpx.HTTPError as exc:
                    last = f"{type(exc).__name__}: {exc}"
                    log.warning("%s attempt %d failed: %s", path, attempt + 1, last)
                    continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = f"HTTP {resp.status_code}: {_excerpt(resp.text)}"
                log.warning("%s attempt %d failed: %s", path, attempt + 1, last)
                continue
            try:
                body = resp.json()
            except ValueError:
                raise ProtocolError(f"{path}: response is not JSON: {_excerpt(resp.text)}") from None
            if resp.status_code != 200:
                message = body.get("error") if isinstance(body, dict) else None
                if resp.status_code == 409:
                    raise ConfigurationError(f"{path}: {message or _excerpt(body)}")
                raise RequestRejected(f"{path}: HTTP {resp.status_code}: {message or _excerpt(body)}")
            if not isinstance(body, dict):
                raise ProtocolError(f"{path}: expected a JSON object, got {_excerpt(body)}")
            return body
        raise TransportError(f"{path}: giving up after {self.endpoint.max_attempts} attempts ({last})")

    def score_text(self, text):
        if not text.strip():
            raise ValueError("cannot score empty text")
        body = self._request("/v1/score", {"text": text})
        if "model" in body and body["model"] != self.endpoint.model:
            raise ConfigurationError(f"requested model {self.endpoint.model!r}, "
                                     f"server scored with {body['model']!r}")
        tokens, scores = body.get("tokens"), body.get("scores")
        if (not isinstance(tokens, list) or not isinstance(scores, list) or "model" not in body
                or len(tokens) != len(scores) or not scores):
            raise ProtocolError(f"/v1/score: malformed response: {_excerpt(body)}")
        log_probs, ranks, entropies = [], [], []
        for i, s in enumerate(scores):
            try:
                lp, r, h = s["log_prob"], s["rank"], s["entropy"]
                check_token_score(lp, r, h)
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"/v1/score: invalid score at position {i} ({exc}): "
                                    f"{_excerpt(s)}") from None
            log_probs.append(float(lp))
            ranks.append(int(r))
            entropies.append(float(h))
        return SequenceScoring(tokens, log_probs, ranks, entropies)

    def score_many(self, texts):
        with ThreadPoolExecutor(max_workers=self.endpoint.max_in_flight) as pool:
            return list(pool.map(self.score_text, texts))

    def generate(self, prompt, max_tokens, temperature=1.0, seed=0):
        """Continuation only; a response that repeats the prompt is rejected."""
        if max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
        body = self._request("/v1/generate", {"prompt": prompt, "max_tokens": int(max_tokens),
                                              "temperature": float(temperature), "seed": int(seed)})
        text = body.get("text")
        if not isinstance(text, str):
            raise ProtocolError(f"/v1/generate: malformed response: {_excerpt(body)}")
        if prompt.strip() and text.startswith(prompt):
            raise ProtocolError(f"/v1/generate: response echoes the prompt: {_excerpt(text)}")
        return text

    def perturb(self, text, mask_fraction=0.15, span_length=2, count=1):
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        if not 0 < mask_fraction < 1:
            raise ValueError(f"mask_fraction must be in (0, 1), got {mask_fraction}")
        body = self._request("/v1/perturb", {"text": text, "mask_fraction": float(mask_fraction),
                                             "span_length": int(span_length), "count": int(count)})
        texts = body.get("texts")
        if (not isinstance(texts, list) or len(texts) != count
                or not all(isinstance(t, str) for t in texts)):
            raise ProtocolError(f"/v1/perturb: expected {count} texts, got {_excerpt(body)}")
        same = sum(t == text for t in texts)
        if same:
            msg = f"{same} of {count} perturbations are identical to the original"
            log.warning(msg)
            self.warnings.append(msg)
        return texts

    def perturber(self, mask_fraction, span_length):
        return RemotePerturber(self, mask_fraction, span_length)


class RemotePerturber:
    def __init__(self, backend, mask_fraction, span_length):
        self.backend = backend
        self.mask_fraction = mask_fraction
        self.span_length = span_length

    def perturb(self, text, count, seed):
        # the wire protocol carries no seed; determinism comes from the cache
        return self.backend.perturb(text, self.mask_fraction, self.span_length, count)
