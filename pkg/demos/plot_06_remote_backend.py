"""
Talking to a scoring service
============================

Run the bundled stub server in-process and use it through the HTTP client,
with a response cache so that a second pass makes no requests at all.
"""

import tempfile

from detectorbench import DetectorConfig, RemoteBackend, RemoteEndpoint, train_ngram
from detectorbench.detectors import score_document
from detectorbench.stub_server import StubServer

model = train_ngram(["the cat sat on the mat . the dog sat on the log .",
                     "a cat saw a dog . the dog saw the cat on a mat ."], order=2)
text = "the cat saw the dog on the mat . a dog sat on the log ."
cache = tempfile.mkdtemp()

# The first request fails once with a 503; the client retries.
with StubServer(model, model_name="demo", fail_first=1) as server:
    endpoint = RemoteEndpoint(server.url, "demo", backoff_base=0.05)
    with RemoteBackend(endpoint, cache_dir=cache) as remote:
        scoring = remote.score_text(text)
        print([(s.token, round(s.log_prob, 3), s.rank) for s in scoring])
        print("continuation:", remote.generate("the cat", 5, temperature=0.0))
        print("detectgpt:", score_document("d", text, remote, DetectorConfig("detectgpt", p=5, mask_fraction=0.3,
                                                                 normalize=False)).score)
        print("network calls:", remote.network_calls)

    with RemoteBackend(endpoint, cache_dir=cache) as warm:
        assert warm.score_text(text) == scoring
        print("warm cache network calls:", warm.network_calls)
