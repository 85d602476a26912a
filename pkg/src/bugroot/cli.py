"""``bugroot`` command line.

Exit codes: 0 success, 1 fatal error (one JSON object on stderr),
2 completed but some input rows were rejected.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Sequence

from bugroot import __version__
from bugroot.balance import LabeledDataset
from bugroot.config import ConfigError, RunConfig, add_config_flags, flag_overrides, resolve
from bugroot.corpus import ROOT_CAUSES, Corpus, CorpusError, Reject, Resolution, dumps_jsonl, frequency, load_corpus
from bugroot.evaluate import cross_validate
from bugroot.model import DEFAULT_GRID, Model, TrainingDiverged, grid_search
from bugroot.pipeline import classify, fit_model, label_indices, tokenize_reports
from bugroot.timefix import DelayMetric, TimelineError, delay_stats, stats_csv
from bugroot.topics import render_topics_table, topics_by_category, topics_to_dict
from bugroot.tracker import FieldMapping, TrackerError, fetch_tracker, records_to_corpus
from bugroot.vectorize import VocabularyError, fit_vocabulary, tfidf_matrix

logger = logging.getLogger("bugroot")

EXIT_OK, EXIT_FATAL, EXIT_REJECTS = 0, 1, 2
FLOAT_DIGITS = 6

_FATAL = (
    ConfigError, CorpusError, TrackerError, TrainingDiverged, TimelineError,
    VocabularyError, ValueError, OSError, RuntimeError,
)


class Output:
    """Where a subcommand writes: ``--out`` file or stdout."""

    def __init__(self, path: str | None) -> None:
        self.path = Path(path) if path else None

    def write(self, text: str) -> None:
        if not text.endswith("\n"):
            text += "\n"
        if self.path is None:
            sys.stdout.write(text)
        else:
            self.path.write_text(text, encoding="utf-8")


def _rounded(obj: Any) -> Any:
    if isinstance(obj, float):
        return round(obj, FLOAT_DIGITS)
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    return obj


def dump_json(obj: Any) -> str:
    return json.dumps(_rounded(obj), indent=2, ensure_ascii=False)


def _report_rejects(rejects: list[Reject], sidecar: Path | None) -> None:
    if not rejects:
        return
    lines = "".join(json.dumps(r.to_dict()) + "\n" for r in rejects)
    if sidecar is not None:
        sidecar.write_text(lines, encoding="utf-8")
        logger.warning("%d row(s) rejected; see %s", len(rejects), sidecar)
    else:
        sys.stderr.write(lines)


def _sidecar(out: str | None) -> Path | None:
    return Path(f"{out}.rejects.jsonl") if out else None


def _load(args: argparse.Namespace) -> tuple[Corpus, list[Reject]]:
    corpus, rejects = load_corpus(args.corpus, getattr(args, "format", None))
    _report_rejects(rejects, _sidecar(getattr(args, "out", None)))
    return corpus, rejects


def _status(rejects: list[Reject]) -> int:
    return EXIT_REJECTS if rejects else EXIT_OK


# subcommands


def cmd_ingest(args: argparse.Namespace, cfg: RunConfig) -> int:
    source = args.source
    if source.startswith(("http://", "https://")):
        t = cfg.tracker
        mapping = FieldMapping.load(t.mapping) if t.mapping else FieldMapping()
        records = fetch_tracker(
            source, t.query, t.page_size,
            mapping=mapping, token=os.environ.get(t.token_env) or None,
            max_retries=t.max_retries, backoff=t.backoff, max_records=t.max_records or None,
        )
        corpus, rejects = records_to_corpus(records, mapping, provenance=f"{source} query={t.query!r}")
    else:
        corpus, rejects = load_corpus(source, args.format)
    Output(args.out).write(dumps_jsonl(corpus.reports) if corpus.reports else "")
    _report_rejects(rejects, _sidecar(args.out))
    logger.info("ingested %d report(s), rejected %d", len(corpus), len(rejects))
    if args.json:
        sys.stderr.write(json.dumps({"reports": len(corpus), "rejects": len(rejects)}) + "\n")
    return _status(rejects)


def cmd_stats(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus, rejects = _load(args)
    freq = frequency(corpus)
    total = sum(f.count for f in freq.values())
    if args.json:
        body = {
            "total": total,
            "categories": {rc.value: {"count": f.count, "share": round(f.share, 4)} for rc, f in freq.items()},
        }
        Output(args.out).write(dump_json(body))
    else:
        order = sorted(ROOT_CAUSES, key=lambda rc: (-freq[rc].count, rc.index))
        width = max(len(rc.title) for rc in ROOT_CAUSES)
        lines = [f"{'Category':<{width}}  {'Count':>6}  {'Share':>6}"]
        lines += [f"{rc.title:<{width}}  {freq[rc].count:>6}  {freq[rc].share * 100:>5.1f}%" for rc in order]
        lines.append(f"{'Total':<{width}}  {total:>6}  {100:>5.1f}%")
        Output(args.out).write("\n".join(lines))
    return _status(rejects)


def _train_config(corpus: Corpus, cfg: RunConfig, jobs: int):
    config = cfg.classifier_config()
    grid_rows = []
    if cfg.model.grid_search:
        labeled = corpus.labeled_subset().reports
        tokens = tokenize_reports(labeled, config.prep)
        vocab = fit_vocabulary(tokens, config.features.min_df, config.features.max_df_ratio)
        data = LabeledDataset(tfidf_matrix(tokens, vocab, l2_normalize=config.features.l2_normalize), label_indices(labeled))
        best, grid_rows = grid_search(
            DEFAULT_GRID, data, cfg.model.grid_folds, cfg.general.seed,
            base=config.hyper, balance=config.balance, smote_k=config.smote_k, jobs=jobs,
        )
        config = replace(config, hyper=best)
    return config, grid_rows


def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus, rejects = _load(args)
    config, grid_rows = _train_config(corpus, cfg, cfg.general.jobs)
    model = fit_model(corpus.reports, config, cfg.general.seed)
    path = model.save(args.out)
    summary = {
        "model": str(path),
        "hyperparams": {k: getattr(model.hyper, k) for k in ("l2_strength", "learning_rate", "max_epochs", "convergence_tol")},
        "epochs": model.epochs,
        "initial_loss": model.initial_loss,
        "final_loss": model.final_loss,
        "vocabulary_size": len(model.vocab) if model.vocab else 0,
        "grid": [r.to_dict() for r in grid_rows],
    }
    if args.json:
        sys.stdout.write(dump_json(summary) + "\n")
    else:
        h = summary["hyperparams"]
        sys.stdout.write(
            f"saved {path} ({summary['vocabulary_size']} terms, {model.epochs} epochs, "
            f"loss {model.initial_loss:.6f} -> {model.final_loss:.6f}, "
            f"l2={h['l2_strength']:g}, lr={h['learning_rate']:g})\n"
        )
    return _status(rejects)


def cmd_classify(args: argparse.Namespace, cfg: RunConfig) -> int:
    model = Model.load(args.model)
    corpus, rejects = load_corpus(args.input, args.format)
    _report_rejects(rejects, _sidecar(args.out))
    results = classify(model, corpus.reports)
    lines = []
    for report, result in zip(corpus.reports, results):
        if result.zero_vector:
            logger.warning("%s: zero-vector (no known term); prediction is the bias-only class", report.id)
        lines.append(json.dumps(_rounded({**report.to_dict(), **result.to_dict()}), ensure_ascii=False))
    Output(args.out).write("\n".join(lines))
    return _status(rejects)


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus, rejects = _load(args)
    report = cross_validate(
        corpus, k=cfg.evaluate.folds, runs=cfg.evaluate.runs, seed=cfg.general.seed,
        config=cfg.classifier_config(), jobs=cfg.general.jobs,
    )
    Output(args.out).write(dump_json(report.to_dict()) if args.json else report.render_table())
    return _status(rejects)


def cmd_topics(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus, rejects = _load(args)
    result, warnings = topics_by_category(
        corpus, cfg.lda_prep_config(), cfg.ga_config(), cfg.general.seed,
        lda_iterations=cfg.topics.iterations, terms_per_topic=cfg.topics.terms, jobs=cfg.general.jobs,
    )
    for w in warnings:
        logger.warning(w)
    if args.json:
        Output(args.out).write(dump_json({"categories": topics_to_dict(result), "warnings": warnings}))
    else:
        Output(args.out).write(render_topics_table(result))
    return _status(rejects)


def cmd_timefix(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus, rejects = _load(args)
    fixed = corpus.filter(lambda r: r.resolution is Resolution.FIXED)
    metrics = list(DelayMetric) if args.metric == "all" else [DelayMetric.parse(args.metric)]
    rows = {}
    for m in metrics:
        rows[m], warnings = delay_stats(fixed, m)
    if args.json:
        body = {
            m.value.upper(): {rc.value: s.to_dict() for rc, s in per.items()} for m, per in rows.items()
        }
        Output(args.out).write(dump_json(body))
    else:
        Output(args.out).write(stats_csv(rows))
    return _status(rejects)


# parser


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS so a flag given before the subcommand is not reset by the subparser
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S, help="root random seed (general.seed)")
    p.add_argument("--jobs", type=int, default=S, help="worker processes (general.jobs)")
    p.add_argument("--config", default=S, help="TOML or JSON config file")
    p.add_argument("--json", action="store_true", default=S, help="machine-readable output")
    p.add_argument("--dump-config", action="store_true", default=S, help="print the effective config and exit")
    p.add_argument("-v", "--verbose", action="count", default=S, help="more logging")
    p.add_argument("-q", "--quiet", action="store_true", default=S, help="errors only")
    add_config_flags(p)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(
        prog="bugroot", parents=[common],
        description="Root-cause classification and characterization of bug reports.",
    )
    parser.add_argument("--version", action="version", version=f"bugroot {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name: str, fn: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=fn)
        return p

    fmt = dict(choices=("jsonl", "csv"), default=None, help="input format (default: from suffix)")

    p = add("ingest", cmd_ingest, "validate a corpus file or fetch from a tracker endpoint")
    p.add_argument("source", help="corpus file, or http(s) URL of a tracker REST endpoint")
    p.add_argument("--format", **fmt)
    p.add_argument("--out", "-o", help="output JSONL (default stdout)")

    for name, fn, help in (
        ("stats", cmd_stats, "category frequency table"),
        ("evaluate", cmd_evaluate, "repeated stratified cross-validation"),
        ("topics", cmd_topics, "LDA-GA topics per category"),
        ("timefix", cmd_timefix, "delay box statistics as CSV"),
    ):
        p = add(name, fn, help)
        p.add_argument("corpus")
        p.add_argument("--format", **fmt)
        p.add_argument("--out", "-o", help="output file (default stdout)")
        if name == "evaluate":
            p.add_argument("--runs", type=int, default=argparse.SUPPRESS, help="alias of --evaluate-runs")
            p.add_argument("--k", type=int, default=argparse.SUPPRESS, help="alias of --evaluate-folds")
        if name == "timefix":
            choices = ["all"] + [m.value for m in DelayMetric]
            p.add_argument("--metric", choices=choices, default="all")

    p = add("train", cmd_train, "train a model on all labeled reports")
    p.add_argument("corpus")
    p.add_argument("--format", **fmt)
    p.add_argument("--out", "-o", required=True, help="model JSON path (vocabulary saved alongside)")

    p = add("classify", cmd_classify, "predict root causes for reports")
    p.add_argument("model")
    p.add_argument("input", help="corpus file of reports to classify")
    p.add_argument("--format", **fmt)
    p.add_argument("--out", "-o", help="output JSONL (default stdout)")
    return parser


def effective_config(args: argparse.Namespace) -> RunConfig:
    overrides = flag_overrides(args)
    general = overrides.setdefault("general", {})
    for flag in ("seed", "jobs"):
        if hasattr(args, flag):
            general[flag] = getattr(args, flag)
    if getattr(args, "quiet", False):
        general["verbosity"] = "error"
    elif getattr(args, "verbose", 0):
        general["verbosity"] = "info" if args.verbose == 1 else "debug"
    evaluate = overrides.setdefault("evaluate", {})
    if hasattr(args, "runs"):
        evaluate["runs"] = args.runs
    if hasattr(args, "k"):
        evaluate["folds"] = args.k
    return resolve(getattr(args, "config", None), {k: v for k, v in overrides.items() if v})


def _fatal(exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    return EXIT_FATAL


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.json = getattr(args, "json", False)
    try:
        cfg = effective_config(args)
    except ConfigError as exc:
        return _fatal(exc)
    level = getattr(logging, cfg.general.verbosity.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)

    if getattr(args, "dump_config", False):
        sys.stdout.write(cfg.to_json() + "\n")
        return EXIT_OK
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_FATAL
    try:
        return args.func(args, cfg)
    except _FATAL as exc:
        return _fatal(exc)


if __name__ == "__main__":
    sys.exit(main())
