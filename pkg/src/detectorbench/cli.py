"""``detectorbench`` command line: corpora, backends, detectors and protocols.

Every run writes its artifacts into ``--out`` with the run's config hash in
each file name, plus a ``run-<hash>.json`` manifest holding the full config,
seed and toolkit version. Outputs depend only on the config, never on
``--jobs`` or wall-clock time.
"""

import argparse
import hashlib
import json
import logging
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from ._io import atomic_write_json, atomic_write_jsonl, atomic_write_text, content_hash
from .corpus import (build_counterparts, default_topic_specs, load_dataset, manifest_path,
                     synth_topics, train_evaluation_backend, write_dataset)
from .detectors import KINDS, DetectorConfig, score_documents
from .harness import (evaluate_pairing, export_score_distribution, histograms_to_svg,
                      mixture_eval, reports_csv, score_table, split_by_topic, transfer_csv,
                      transfer_matrix)
from .ngram import NGramModel, train_ngram
from .remote import RemoteBackend, RemoteEndpoint
from .topic_metrics import (MODES, UndefinedCorrelationError, entropy_performance_correlation,
                            entropy_reports_csv, topic_entropy)

log = logging.getLogger("detectorbench")

BUNDLED_DIR = Path(__file__).parent / "data"
BUNDLED_DATASET = BUNDLED_DIR / "synthetic.jsonl"
BUNDLED_BACKEND = BUNDLED_DIR / "synthetic-backend.json"


class CLIError(Exception):
    pass


def _csv_list(value):
    return [v.strip() for v in value.split(",") if v.strip()]


def _int_list(value):
    return [int(v) for v in _csv_list(value)]


def _version():
    try:
        described = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                                   cwd=Path(__file__).parent, capture_output=True, text=True,
                                   timeout=5)
        if described.returncode == 0 and described.stdout.strip():
            return f"{__version__}+{described.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


class Outputs:
    """Tracks files written by a run so a failed run can remove them."""

    def __init__(self, out_dir, config_hash):
        self.dir = Path(out_dir)
        self.hash = config_hash
        self.written = []

    def path(self, stem, ext):
        return self.dir / f"{stem}-{self.hash}.{ext}"

    def text(self, stem, ext, text):
        p = self.path(stem, ext)
        self.written.append(p)
        atomic_write_text(p, text)
        return p

    def json(self, stem, obj):
        p = self.path(stem, "json")
        self.written.append(p)
        atomic_write_json(p, obj)
        return p

    def jsonl(self, stem, rows):
        p = self.path(stem, "jsonl")
        self.written.append(p)
        atomic_write_jsonl(p, rows)
        return p

    def dataset(self, stem, documents):
        p = self.path(stem, "jsonl")
        self.written += [p, manifest_path(p)]
        write_dataset(p, documents)
        return p

    def cleanup(self):
        for p in self.written:
            p.unlink(missing_ok=True)


def _file_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _dataset_path(value):
    if value is None:
        raise CLIError("--dataset is required")
    return BUNDLED_DATASET if value == "bundled" else Path(value)


def load_backend(args):
    if args.backend is None:
        raise CLIError("--backend is required (a model file, 'bundled' or 'remote')")
    if args.backend == "remote":
        if not args.model:
            raise CLIError("--backend remote needs --model")
        endpoint = RemoteEndpoint.from_env(args.model, base_url=args.endpoint,
                                           max_in_flight=max(1, args.jobs))
        return RemoteBackend(endpoint, cache_dir=args.cache_dir)
    path = BUNDLED_BACKEND if args.backend == "bundled" else Path(args.backend)
    if not path.exists():
        raise CLIError(f"backend model file {path} does not exist")
    return NGramModel.load(path)


def detector_configs(args):
    kinds = []
    for value in args.detector or ["logp", "rank", "logrank"]:
        kinds += _csv_list(value)
    configs = []
    for kind in kinds:
        if kind not in KINDS:
            raise CLIError(f"unknown detector {kind!r}; choose from {', '.join(KINDS)}")
        base = DetectorConfig(kind, mask_fraction=args.mask_fraction, span_length=args.span_length,
                              normalize=args.normalize, seed=args.seed,
                              flip=kind in (args.flip or []))
        if kind == "detectgpt":
            configs += [replace(base, p=p) for p in (args.p or [10])]
        else:
            configs.append(base)
    return configs


def _select(documents, origin, topics):
    docs = [d for d in documents if d.origin == origin]
    if topics:
        docs = [d for d in docs if d.topic in topics]
    return docs


# subcommands

def cmd_train_backend(args, out):
    texts = []
    for path in args.corpus or []:
        texts.append(Path(path).read_text(encoding="utf-8"))
    if args.dataset:
        docs, _ = load_dataset(_dataset_path(args.dataset))
        texts += [d.text for d in _select(docs, "human", args.human_topics)]
    if not texts:
        raise CLIError("train-backend needs --corpus files or a --dataset")
    model = train_ngram(texts, order=args.order, delta=args.delta)
    path = out.path("backend", "json")
    out.written.append(path)
    model.save(path)
    return {"backend": path.name, "backend_id": model.backend_id}


def cmd_synth(args, out):
    names = args.topic_names or ["low", "mid", "high"][:len(args.temperatures)]
    if len(names) != len(args.temperatures):
        raise CLIError("--topic-names and --temperatures must have the same length")
    specs = default_topic_specs(n_docs=args.n, doc_length=args.doc_length, seed=args.seed,
                                temperatures=args.temperatures, names=names)
    backend = train_evaluation_backend(specs, order=args.order, delta=args.delta)
    docs = synth_topics(specs, backend, args.seed, prompt_tokens=args.prompt_tokens,
                        order=args.order)
    path = out.path("backend", "json")
    out.written.append(path)
    backend.save(path)
    data = out.dataset("dataset", docs)
    return {"backend": path.name, "dataset": data.name, "backend_id": backend.backend_id}


def cmd_generate(args, backend, documents, out):
    human = _select(documents, "human", args.human_topics)
    unit = "chars" if args.prompt_chars else "tokens"
    length = args.prompt_chars or args.prompt_tokens
    machine, skipped = build_counterparts(backend, human, length, args.max_tokens,
                                          args.temperature, args.seed, prompt_unit=unit)
    data = out.dataset("dataset", human + machine)
    return {"dataset": data.name, "generated": len(machine), "skipped": skipped}


def cmd_score(args, backend, documents, out):
    files = []
    for config in detector_configs(args):
        scores = score_documents(sorted(documents, key=lambda d: d.id), backend, config,
                                 jobs=args.jobs)
        rows = [{"doc_id": s.doc_id, "detector": s.detector, "score": s.score,
                 "n_tokens": s.n_tokens, "config_hash": s.config_hash,
                 "backend_id": s.backend_id} for s in scores]
        files.append(out.jsonl(f"scores-{config.name}", rows).name)
    return {"scores": files}


def _topic_entropies(backend, documents, topics=None):
    human = split_by_topic(documents, "human")
    topics = topics or sorted(human)
    reports = []
    for t in topics:
        if t not in human:
            raise CLIError(f"topic {t!r} has no human documents")
        reports += [topic_entropy(backend, human[t], mode, topic=t) for mode in MODES]
    return reports


def cmd_topic_entropy(args, backend, documents, out):
    reports = _topic_entropies(backend, documents, args.human_topics)
    out.json("topic-entropy", {"reports": [r.to_dict() for r in reports]})
    out.text("topic-entropy", "csv", entropy_reports_csv(reports))
    return {"topics": sorted({r.topic for r in reports})}


def cmd_evaluate(args, backend, documents, out):
    human = _select(documents, "human", args.human_topics)
    machine = _select(documents, args.machine_origin, args.machine_topics)
    reports = [evaluate_pairing(c, backend, human, machine, args.seed, n=args.n, jobs=args.jobs,
                                fpr_positive=args.fpr_positive)
               for c in detector_configs(args)]
    out.json("evaluate", {"reports": [r.to_dict() for r in reports]})
    out.text("evaluate", "csv", reports_csv(reports))
    return {"auroc": {r.detector: r.auroc for r in reports}}


def cmd_transfer(args, backend, documents, out):
    all_reports = []
    for config in detector_configs(args):
        matrix = transfer_matrix(config, backend, documents, args.human_topics, args.seed,
                                 machine_topics=args.machine_topics, n=args.n, jobs=args.jobs,
                                 fpr_positive=args.fpr_positive)
        out.text(f"transfer-{config.name}-auroc", "csv", transfer_csv(matrix, "auroc"))
        out.text(f"transfer-{config.name}-fpr95", "csv", transfer_csv(matrix, "fpr95"))
        all_reports += [matrix[k] for k in sorted(matrix)]
    out.json("transfer", {"reports": [r.to_dict() for r in all_reports]})
    out.text("transfer", "csv", reports_csv(all_reports))
    return {"cells": len(all_reports)}


def cmd_mixture(args, backend, documents, out):
    if not args.human_topics or not args.machine_topics:
        raise CLIError("mixture needs --human-topics and --machine-topics")
    machine_sets = [[t] for t in args.machine_topics]
    if len(args.machine_topics) > 1:
        machine_sets.append(list(args.machine_topics))
    reports = []
    for config in detector_configs(args):
        scores = score_table(documents, backend, config, jobs=args.jobs)
        reports += [mixture_eval(config, backend, documents, args.human_topics, ms, args.seed,
                                 n=args.n, scores=scores, fpr_positive=args.fpr_positive)
                    for ms in machine_sets]
    out.json("mixture", {"reports": [r.to_dict() for r in reports]})
    out.text("mixture", "csv", reports_csv(reports))
    return {"rows": len(reports)}


def cmd_report(args, backend, documents, out):
    human = split_by_topic(documents, "human")
    machine = split_by_topic(documents, "machine")
    topics = [t for t in (args.human_topics or sorted(human)) if t in machine]
    entropies = {(r.topic, r.mode): r.value for r in _topic_entropies(backend, documents, topics)}
    summary = {"topics": topics, "topic_entropy": {}, "detectors": {}}
    for t in topics:
        summary["topic_entropy"][t] = {m: entropies[t, m] for m in MODES}
    pool = [d for t in topics for d in human[t] + machine[t]]
    for config in detector_configs(args):
        scores = score_table(pool, backend, config, jobs=args.jobs)
        det = {"distributions": {}, "in_topic_auroc": {}, "correlation": {}}
        for t in topics:
            hists, stats = export_score_distribution(
                {"human": [scores[d.id] for d in human[t]],
                 "machine": [scores[d.id] for d in machine[t]]},
                bins=args.bins, metric=config.name, topic=t)
            det["distributions"][t] = {"summary": stats, "histograms": [h.to_dict() for h in hists]}
            out.text(f"hist-{config.name}-{t}", "svg",
                     histograms_to_svg(hists, f"{config.name} / {t}"))
            det["in_topic_auroc"][t] = evaluate_pairing(config, backend, human[t], machine[t],
                                                        args.seed, n=args.n, scores=scores).auroc
        for mode in MODES:
            pairs = [(entropies[t, mode], det["in_topic_auroc"][t]) for t in topics]
            try:
                r, rho = entropy_performance_correlation(pairs)
                det["correlation"][mode] = {"pearson": r, "spearman": rho}
            except (UndefinedCorrelationError, ValueError) as exc:
                det["correlation"][mode] = {"error": str(exc)}
        summary["detectors"][config.name] = det
    out.json("report", summary)
    return {"topics": topics}


DATA_COMMANDS = {
    "generate": cmd_generate,
    "score": cmd_score,
    "topic-entropy": cmd_topic_entropy,
    "evaluate": cmd_evaluate,
    "transfer": cmd_transfer,
    "mixture": cmd_mixture,
    "report": cmd_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--config", help="JSON file of flag defaults (keys use flag names)")
    g.add_argument("--backend", help="n-gram model file, 'bundled', or 'remote'")
    g.add_argument("--endpoint", help="remote service URL (or $DETECTORBENCH_ENDPOINT)")
    g.add_argument("--model", help="remote model name")
    g.add_argument("--cache-dir", default=".detectorbench-cache", help="remote response cache")
    g.add_argument("--detector", action="append",
                   help=f"detector(s), repeatable or comma-separated: {', '.join(KINDS)}")
    g.add_argument("--p", type=_int_list, help="DetectGPT perturbation counts, e.g. 1,10")
    g.add_argument("--mask-fraction", type=float, default=0.15)
    g.add_argument("--span-length", type=int, default=2)
    g.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    g.add_argument("--flip", type=_csv_list, help="detectors whose orientation is negated")
    g.add_argument("--dataset", help="JSON-lines dataset, or 'bundled'")
    g.add_argument("--human-topics", type=_csv_list)
    g.add_argument("--machine-topics", type=_csv_list)
    g.add_argument("--machine-origin", choices=["machine", "human"], default="machine",
                   help="origin of the machine-side pool (human gives a null control)")
    g.add_argument("--fpr-positive", choices=["machine", "human"], default="machine",
                   help="class treated as positive for FPR95")
    g.add_argument("--n", type=int, default=150, help="documents per class (per topic for synth)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--out", default="out", help="output directory")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="detectorbench", description=__doc__.splitlines()[0].replace("``", ""))
    parser.add_argument("--version", action="version", version=f"detectorbench {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("train-backend", parents=[common], help="train an n-gram backend")
    p.add_argument("--corpus", nargs="+", help="plain-text training files")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.1)

    p = sub.add_parser("synth", parents=[common], help="build synthetic topics")
    p.add_argument("--temperatures", type=lambda v: [float(x) for x in _csv_list(v)],
                   default=[0.3, 0.7, 1.2])
    p.add_argument("--topic-names", type=_csv_list)
    p.add_argument("--doc-length", type=int, default=40)
    p.add_argument("--prompt-tokens", type=int, default=30)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.1)

    p = sub.add_parser("generate", parents=[common], help="machine counterparts of human docs")
    p.add_argument("--prompt-tokens", type=int, default=30)
    p.add_argument("--prompt-chars", type=int, help="measure the prompt in characters instead")
    p.add_argument("--max-tokens", type=int, default=100)
    p.add_argument("--temperature", type=float, default=1.0)

    sub.add_parser("score", parents=[common], help="dump per-document detector scores")
    sub.add_parser("topic-entropy", parents=[common], help="topic entropy per human topic")
    sub.add_parser("evaluate", parents=[common], help="AUROC/FPR95 for one pairing")
    sub.add_parser("transfer", parents=[common], help="topic-transfer AUROC matrix")
    sub.add_parser("mixture", parents=[common], help="mixed-topic evaluations")
    p = sub.add_parser("report", parents=[common], help="score histograms + correlation summary")
    p.add_argument("--bins", type=int, default=30)
    return parser


def _apply_config_file(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = json.loads(Path(known.config).read_text(encoding="utf-8"))
    defaults = {k.replace("-", "_"): v for k, v in values.items()}
    for action in parser._subparsers._group_actions:
        for sub in action.choices.values():
            sub.set_defaults(**defaults)


def run_config(args, dataset_hash=None, backend_id=None):
    """The output-determining part of the parsed flags."""
    skip = {"out", "jobs", "verbose", "config", "cache_dir"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["dataset_sha256"] = dataset_hash
    cfg["backend_id"] = backend_id
    return cfg


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
    except (OSError, ValueError) as exc:
        print(f"detectorbench: error: cannot read --config: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        print("detectorbench: error: a command is required", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = backend = None
    try:
        if args.command in ("train-backend", "synth"):
            dataset_hash = _file_hash(_dataset_path(args.dataset)) if args.dataset else None
            config = run_config(args, dataset_hash)
            out = Outputs(args.out, content_hash(config))
            handler = cmd_train_backend if args.command == "train-backend" else cmd_synth
            result = handler(args, out)
        else:
            path = _dataset_path(args.dataset)
            documents, _ = load_dataset(path)
            backend = load_backend(args)
            config = run_config(args, _file_hash(path), backend.backend_id)
            out = Outputs(args.out, content_hash(config))
            result = DATA_COMMANDS[args.command](args, backend, documents, out)
        manifest = {"command": args.command, "config": config, "config_hash": out.hash,
                    "seed": args.seed, "version": _version(),
                    "outputs": sorted(p.name for p in out.written), "result": result}
        out.json("run", manifest)
    except Exception as exc:
        if out is not None:
            out.cleanup()
        if args.verbose:
            log.exception("run failed")
        print(f"detectorbench: error: {exc}", file=sys.stderr)
        return 1
    finally:
        if hasattr(backend, "close"):
            backend.close()
    print(json.dumps({"config_hash": out.hash, "outputs": sorted(p.name for p in out.written)},
                     indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
