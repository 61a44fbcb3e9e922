"""In-process stand-in for a scoring service, backed by an n-gram model.

Used by the test suite and for offline demos. Knobs inject faults: leading
failures, corrupted scores, a wrong model name, echoed prompts.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .detectors import perturb_spans
from .rng import derive_seed


class StubServer:
    def __init__(self, model, model_name="stub-ngram", *, fail_first=0, fail_status=503,
                 bad_entropy=False, served_model=None, fixed_text=None,
                 identical_perturbations=False, token=None):
        self.model = model
        self.model_name = model_name
        self.fail_first = fail_first
        self.fail_status = fail_status
        self.bad_entropy = bad_entropy
        self.served_model = served_model
        self.fixed_text = fixed_text
        self.identical_perturbations = identical_perturbations
        self.token = token
        self.requests = []
        self._lock = threading.Lock()
        self._httpd = None
        self._thread = None

    @property
    def url(self):
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self):
        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), self._handler())
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._thread.join()
            self._httpd = None

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def handle(self, path, body, headers):
        """Return ``(status, payload)`` for one request."""
        with self._lock:
            self.requests.append((path, body))
            n = len(self.requests)
        if n <= self.fail_first:
            return self.fail_status, {"error": f"injected failure {n}"}
        if self.token is not None and headers.get("Authorization") != f"Bearer {self.token}":
            return 401, {"error": "missing or wrong bearer token"}
        if body.get("model") != self.model_name:
            return 409, {"error": f"model {body.get('model')!r} is not served here"}
        if path == "/v1/score":
            return 200, self._score(body["text"])
        if path == "/v1/generate":
            return 200, self._generate(body)
        if path == "/v1/perturb":
            return 200, self._perturb(body)
        return 404, {"error": f"no route {path}"}

    def _score(self, text):
        ids = self.model.tokenize(text)
        if not ids:
            return {"model": self.model_name, "tokens": [], "scores": []}
        scoring = self.model.score_sequence(ids)
        scores = [{"log_prob": float(lp), "rank": int(r), "entropy": float(h)}
                  for lp, r, h in zip(scoring.log_probs, scoring.ranks, scoring.entropies)]
        if self.bad_entropy:
            scores[0]["entropy"] = -0.1
        return {"model": self.served_model or self.model_name,
                "tokens": self.model.vocabulary.decode(ids), "scores": scores}

    def _generate(self, body):
        if self.fixed_text is not None:
            return {"text": self.fixed_text}
        return {"text": self.model.generate(body["prompt"], body["max_tokens"],
                                            body["temperature"], body["seed"])}

    def _perturb(self, body):
        text = body["text"]
        if self.identical_perturbations:
            return {"texts": [text] * body["count"]}
        ids = self.model.tokenize(text)
        seed = derive_seed(0, text)
        return {"texts": [self.model.detokenize(perturb_spans(ids, body["mask_fraction"],
                                                              body["span_length"], self.model,
                                                              derive_seed(seed, i)))
                          for i in range(body["count"])]}

    def _handler(self):
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                    status, payload = stub.handle(self.path, body, self.headers)
                except Exception as exc:  # surfaced to the client as a 400
                    status, payload = 400, {"error": f"{type(exc).__name__}: {exc}"}
                data = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        return Handler
