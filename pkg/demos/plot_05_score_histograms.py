"""
Score distributions per topic
=============================

Export histograms of the log-probability statistic for each topic and
write them as small SVG figures.
"""

from pathlib import Path

from detectorbench import (DetectorConfig, default_topic_specs, export_score_distribution,
                           synth_topics, train_evaluation_backend)
from detectorbench.harness import histograms_to_svg, score_table

specs = default_topic_specs(seed=0)
backend = train_evaluation_backend(specs)
docs = synth_topics(specs, backend, master_seed=0)
config = DetectorConfig("logp")
scores = score_table(docs, backend, config)

out = Path("/tmp/detectorbench-demo")
out.mkdir(exist_ok=True)
for spec in specs:
    by_class = {origin: [scores[d.id] for d in docs if d.topic == spec.name and d.origin == origin]
                for origin in ("human", "machine")}
    hists, summary = export_score_distribution(by_class, bins=20, metric=config.name,
                                               topic=spec.name)
    path = out / f"hist-{spec.name}.svg"
    path.write_text(histograms_to_svg(hists, f"logp / {spec.name}"))
    print(spec.name, {k: round(v["mean"], 3) for k, v in summary.items()}, "->", path)
