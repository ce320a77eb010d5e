"""Command-line entry point.

Exit codes: 0 success, 1 validation or data error, 2 transport failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data_path
from .config import load_config
from .directive import first_directive
from .errors import OmpGuideError, TransportError
from .harness import (
    ANNOTATION,
    BASIC,
    GUIDED,
    HEURISTIC,
    METRIC_COLUMNS,
    LoopSample,
    PipelineRun,
    classifier_report,
    correlate,
    gold_annotations,
    load_corpus,
    run_pipeline,
    score_run,
    score_sample,
    speedup_report,
)
from .llm import LIVE, REPLAY, LLMClient
from .oracle import AnnotationStore, LoopSource, PatternDecision, decide_from_annotation, decide_heuristic
from .prompts import CODELLAMA_CHAT, GENERIC, MODEL_FAMILIES

logger = logging.getLogger("ompguide")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_TRANSPORT = 2


def _guess_family(model: str) -> str:
    return CODELLAMA_CHAT if "codellama" in model.lower() else GENERIC


def _write_reports(report, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.md").write_text(report.to_markdown())


def cmd_score(args, settings) -> int:
    if args.candidate:
        if not args.reference:
            raise OmpGuideError("--candidate needs --reference")
        ref_text = Path(args.reference).read_text()
        parallel = first_directive(ref_text, settings.registry) is not None
        sample = LoopSample("cli", "", "", "", ref_text, PatternDecision(parallel))
        scores = score_sample(sample, Path(args.candidate).read_text(), settings.registry)
        for m in METRIC_COLUMNS:
            print(f"{m}\t{scores.metric(m):.2f}")
        return EXIT_OK
    if not args.run:
        raise OmpGuideError("score needs --candidate/--reference or --run")
    corpus = load_corpus(args.corpus)
    report = score_run(PipelineRun.read(args.run), corpus, settings.registry)
    sys.stdout.write(report.to_csv() if args.format == "csv" else report.to_markdown())
    return EXIT_OK


def cmd_pipeline(args, settings) -> int:
    corpus = load_corpus(args.corpus)
    overrides = {"model": args.model, "backend": args.backend}
    replay_dir = args.replay_dir or settings.llm.get("replay_dir")
    backend = args.backend or settings.llm.get("backend", REPLAY)
    if backend == REPLAY and not replay_dir:
        replay_dir = str(data_path("replay"))
    overrides["replay_dir"] = replay_dir
    cfg = settings.generation_config(**overrides)
    family = args.family or settings.family or _guess_family(cfg.model)
    annotations = AnnotationStore.load(args.annotations) if args.annotations else gold_annotations(corpus)

    with LLMClient(cfg) as client:
        run = run_pipeline(corpus, args.mode, client, args.oracle, annotations, family, settings.templates)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run.write(out / "outputs.jsonl")
    report = score_run(run, corpus, settings.registry)
    _write_reports(report, out)
    logger.info("%d samples, %d model calls, reports in %s", len(corpus), run.llm_calls, out)

    kinds = {o.error_kind for o in run.outcomes if o.error}
    if "transport" in kinds:
        return EXIT_TRANSPORT
    return EXIT_INVALID if kinds else EXIT_OK


def cmd_oracle(args, settings) -> int:
    if args.corpus:
        corpus = load_corpus(args.corpus)
        if args.annotations:
            store = AnnotationStore.load(args.annotations)
            decisions = {s.id: decide_from_annotation(s.id, store) for s in corpus}
        else:
            decisions = {s.id: decide_heuristic(LoopSource(s.id, s.sequential_code)) for s in corpus}
        sys.stdout.write(classifier_report(decisions, corpus).to_markdown())
        return EXIT_OK
    if not args.loop:
        raise OmpGuideError("oracle needs a loop file or --corpus")
    code = Path(args.loop).read_text()
    sid = args.id or Path(args.loop).stem
    if args.annotations:
        decision = decide_from_annotation(sid, AnnotationStore.load(args.annotations))
    else:
        decision = decide_heuristic(LoopSource(sid, code), strict=args.strict)
    print(json.dumps({"id": sid, **decision.to_json()}, indent=2))
    return EXIT_OK


def cmd_correlate(args, settings) -> int:
    corpus = load_corpus(args.corpus)
    report = score_run(PipelineRun.read(args.run), corpus, settings.registry)
    sys.stdout.write(correlate(report, corpus).to_markdown())
    return EXIT_OK


def cmd_speedup(args, settings) -> int:
    paths = args.csv or [data_path("runtimes_npb.csv"), data_path("runtimes_rodinia.csv")]
    for path in paths:
        table = speedup_report(path)
        sys.stdout.write(table.to_csv() if args.format == "csv" else table.to_markdown())
    return EXIT_OK


def cmd_report(args, settings) -> int:
    corpus = load_corpus(args.corpus)
    report = score_run(PipelineRun.read(args.run), corpus, settings.registry)
    _write_reports(report, Path(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ompguide", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="TOML settings file")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    default_corpus = str(data_path("corpus.jsonl"))

    p = sub.add_parser("score", help="score a candidate against a reference, or a whole run")
    p.add_argument("--candidate")
    p.add_argument("--reference")
    p.add_argument("--corpus", default=default_corpus)
    p.add_argument("--run", help="outputs.jsonl written by `pipeline`")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("pipeline", help="generate and score a corpus")
    p.add_argument("--corpus", default=default_corpus)
    p.add_argument("--mode", choices=(BASIC, GUIDED), default=GUIDED)
    p.add_argument("--oracle", choices=(ANNOTATION, HEURISTIC), default=ANNOTATION)
    p.add_argument("--backend", choices=(LIVE, REPLAY))
    p.add_argument("--replay-dir")
    p.add_argument("--annotations", help="JSONL of pattern decisions (default: corpus gold)")
    p.add_argument("--model")
    p.add_argument("--family", choices=MODEL_FAMILIES, help="prompt wrapper (default: guessed from the model name)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("oracle", help="print the pattern decision for a loop file")
    p.add_argument("loop", nargs="?")
    p.add_argument("--id")
    p.add_argument("--annotations")
    p.add_argument("--strict", action="store_true", help="fail on loops the analyzer cannot handle")
    p.add_argument("--corpus", help="score the oracle against a corpus instead")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("correlate", help="Spearman correlation of metrics with human scores")
    p.add_argument("--corpus", default=default_corpus)
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("speedup", help="speedup table from runtime CSV files")
    p.add_argument("csv", nargs="*")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.set_defaults(func=cmd_speedup)

    p = sub.add_parser("report", help="write CSV and Markdown reports for an existing run")
    p.add_argument("--corpus", default=default_corpus)
    p.add_argument("--run", required=True)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = load_config(args.config)
        return args.func(args, settings)
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (OmpGuideError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
