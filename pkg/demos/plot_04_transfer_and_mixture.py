"""
Topic transfer and topic mixtures
=================================

Evaluate with human references from one topic and machine text from another,
then pool topics on both sides.
"""

from detectorbench import (DetectorConfig, default_topic_specs, mixture_eval, synth_topics,
                           train_evaluation_backend, transfer_matrix)
from detectorbench.harness import transfer_csv

specs = default_topic_specs(seed=0)
backend = train_evaluation_backend(specs)
docs = synth_topics(specs, backend, master_seed=0)
config = DetectorConfig("logp")

# Rows are human topics, columns machine topics; the diagonal is in-topic.
matrix = transfer_matrix(config, backend, docs, seed=0)
print(transfer_csv(matrix, "auroc"))

# Human text from the open topic makes machine text from the narrow topic
# look trivially machine-like; the reverse pairing collapses.
print("high human vs low machine", matrix["high", "low"].auroc)
print("low human vs high machine", matrix["low", "high"].auroc)

# Pooling both machine topics lands between the two single-topic scores.
for machine_topics in (["low"], ["high"], ["low", "high"]):
    report = mixture_eval(config, backend, docs, ["low", "high"], machine_topics, seed=0)
    print(f"human low+high vs machine {'+'.join(machine_topics):8s} AUROC {report.auroc:.3f}")
