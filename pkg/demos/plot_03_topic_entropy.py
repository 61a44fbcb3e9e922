"""
Topic entropy and detection difficulty
======================================

Three synthetic topics differ in the sampling temperature of their human
text. Measure each topic's entropy under the shared backend and compare it
with in-topic detection AUROC.
"""

from detectorbench import (DetectorConfig, default_topic_specs, entropy_performance_correlation,
                           evaluate_pairing, synth_topics, topic_entropy,
                           train_evaluation_backend)

specs = default_topic_specs(seed=0)
backend = train_evaluation_backend(specs)
docs = synth_topics(specs, backend, master_seed=0)
topics = [s.name for s in specs]

rows = []
for t in topics:
    human = [d for d in docs if d.topic == t and d.origin == "human"]
    machine = [d for d in docs if d.topic == t and d.origin == "machine"]
    h = topic_entropy(backend, human, topic=t)
    a = evaluate_pairing(DetectorConfig("logrank"), backend, human, machine, seed=0).auroc
    rows.append((h.value, a))
    print(f"{t:5s} topic entropy {h.value:.3f} nats/token   logrank AUROC {a:.3f}")

pearson, spearman = entropy_performance_correlation(rows)
print(f"pearson {pearson:.3f}  spearman {spearman:.3f}")
