"""
Zero-shot detector statistics
=============================

Score human-written and greedy machine continuations from one synthetic topic
with each statistic. All scores are oriented so that larger means "more
likely machine".
"""

import numpy as np

from detectorbench import (DetectorConfig, auroc, default_topic_specs, score_documents,
                           synth_topics, train_evaluation_backend)

specs = default_topic_specs(n_docs=60, seed=0)
backend = train_evaluation_backend(specs)
docs = synth_topics(specs, backend, master_seed=0)
human = [d for d in docs if d.topic == "high" and d.origin == "human"]
machine = [d for d in docs if d.topic == "high" and d.origin == "machine"]

# A machine document repeats its human prompt, then continues greedily.
print(human[0].text[:80], "...")
print(machine[0].text[:80], "...")
print(machine[0].provenance)

for kind in ("logp", "rank", "logrank", "entropy"):
    config = DetectorConfig(kind)
    hs = [s.score for s in score_documents(human, backend, config)]
    ms = [s.score for s in score_documents(machine, backend, config)]
    print(f"{kind:8s} human {np.mean(hs):8.3f}  machine {np.mean(ms):8.3f}  AUROC {auroc(ms, hs):.3f}")

# The entropy statistic points the wrong way on this backend; flip it.
flipped = DetectorConfig("entropy", flip=True)
hs = [s.score for s in score_documents(human, backend, flipped)]
ms = [s.score for s in score_documents(machine, backend, flipped)]
print("entropy (flipped) AUROC", round(auroc(ms, hs), 3))

# DetectGPT compares a document with span-rewritten copies of itself.
for p in (1, 10):
    config = DetectorConfig("detectgpt", p=p, normalize=False)
    hs = [s.score for s in score_documents(human, backend, config, jobs=4)]
    ms = [s.score for s in score_documents(machine, backend, config, jobs=4)]
    print(f"detectgpt p={p:2d}: mean discrepancy human {np.mean(hs):.3f}, "
          f"machine {np.mean(ms):.3f}, AUROC {auroc(ms, hs):.3f}")
