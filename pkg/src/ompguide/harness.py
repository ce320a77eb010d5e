"""Corpus loading, pipeline orchestration and report generation."""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .clauses import DEFAULT_REGISTRY, SensitivityRegistry
from .directive import MalformedLine, canonical_ws, extract_directives, first_directive, strip_fences
from .errors import (
    DegenerateInput,
    GenerationError,
    MissingRecord,
    SchemaError,
    TransportError,
)
from .llm import GenerationRecord, LLMClient
from .metrics import ConfusionCounts, RuntimePair, accuracy, bleu, meteor, rouge_l, spearman, speedup_percent, tokenize
from .ompscore import omp_score
from .oracle import AnnotationStore, LoopSource, PatternDecision, decide_from_annotation, decide_heuristic
from .prompts import DEFAULT_TEMPLATES, GENERIC, TemplateSet, render_basic, render_guided

logger = logging.getLogger(__name__)

BASIC = "basic"
GUIDED = "guided"
ANNOTATION = "annotation"
HEURISTIC = "heuristic"

METRIC_COLUMNS = ("bleu", "rouge_l", "meteor", "ompscore", "body_bleu", "body_rouge_l", "body_meteor")
NOT_COMPUTED = ("codebleu", "codebertscore")


# ---------------------------------------------------------------- corpus


@dataclass(frozen=True)
class LoopSample:
    id: str
    benchmark: str
    app: str
    sequential_code: str
    reference_parallel_code: str
    gold: PatternDecision
    human_score: int | None = None


def _sample_from_obj(obj: Mapping, where: str) -> LoopSample:
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        raise SchemaError(f"{where}: missing 'id'", field="id")
    for key in ("sequential_code", "reference_parallel_code"):
        if not isinstance(obj.get(key), str):
            raise SchemaError("must be a string", sid, key)
    gold_obj = obj.get("gold")
    if not isinstance(gold_obj, Mapping):
        raise SchemaError("must be an object", sid, "gold")
    gold = PatternDecision.from_json(gold_obj, "annotation", sid)
    has_directive = bool(extract_directives(obj["reference_parallel_code"]))
    if has_directive != gold.parallel:
        raise SchemaError(
            "reference code must contain a directive exactly when gold.parallel is true",
            sid,
            "reference_parallel_code",
        )
    human = obj.get("human_score")
    if human is not None:
        if isinstance(human, bool) or not isinstance(human, (int, float)) or human != int(human):
            raise SchemaError("must be an integer", sid, "human_score")
        if not 0 <= human <= 5:
            raise SchemaError("must lie in [0, 5]", sid, "human_score")
        human = int(human)
    return LoopSample(
        sid,
        str(obj.get("benchmark", "")),
        str(obj.get("app", "")),
        obj["sequential_code"],
        obj["reference_parallel_code"],
        gold,
        human,
    )


def _load_sample_dir(folder: Path) -> dict:
    meta_path = folder / "sample.json"
    if not meta_path.exists():
        raise SchemaError(f"{folder}: missing sample.json")
    obj = json.loads(meta_path.read_text())
    obj.setdefault("id", folder.name)
    for key, fname in (("sequential_code", "sequential.c"), ("reference_parallel_code", "parallel.c")):
        if key not in obj:
            path = folder / fname
            if not path.exists():
                raise SchemaError(f"missing {fname}", obj["id"], key)
            obj[key] = path.read_text()
    return obj


def load_corpus(path: str | Path) -> list[LoopSample]:
    """Load a JSONL corpus or a directory of sample folders, sorted by id."""
    path = Path(path)
    objs: list[tuple[dict, str]] = []
    if path.is_dir():
        for folder in sorted(p for p in path.iterdir() if p.is_dir()):
            objs.append((_load_sample_dir(folder), str(folder)))
    else:
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                objs.append((json.loads(line), f"{path}:{lineno}"))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    samples: dict[str, LoopSample] = {}
    for obj, where in objs:
        sample = _sample_from_obj(obj, where)
        if sample.id in samples:
            raise SchemaError("duplicate id", sample.id, "id")
        samples[sample.id] = sample
    if not samples:
        logger.warning("corpus %s is empty", path)
    return [samples[k] for k in sorted(samples)]


def gold_annotations(corpus: Sequence[LoopSample]) -> AnnotationStore:
    store = AnnotationStore()
    store.update({s.id: s.gold for s in corpus})
    return store


# ---------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class SampleOutcome:
    id: str
    decision: PatternDecision | None
    prompt: str | None
    record: GenerationRecord | None
    output_code: str
    error: str | None = None
    error_kind: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "decision": self.decision.to_json() if self.decision else None,
            "prompt": self.prompt,
            "record": self.record.to_json() if self.record else None,
            "output_code": self.output_code,
            "error": self.error,
            "error_kind": self.error_kind,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampleOutcome":
        dec = obj.get("decision")
        rec = obj.get("record")
        return cls(
            obj["id"],
            PatternDecision.from_json(dec, dec.get("source", "annotation")) if dec else None,
            obj.get("prompt"),
            GenerationRecord.from_json(rec) if rec else None,
            obj.get("output_code", ""),
            obj.get("error"),
            obj.get("error_kind"),
        )


@dataclass
class PipelineRun:
    mode: str
    model: str
    model_family: str
    oracle: str | None
    outcomes: list[SampleOutcome] = field(default_factory=list)

    @property
    def llm_calls(self) -> int:
        return sum(1 for o in self.outcomes if o.prompt is not None)

    @property
    def decisions(self) -> dict[str, PatternDecision]:
        return {o.id: o.decision for o in self.outcomes if o.decision is not None}

    def by_id(self) -> dict[str, SampleOutcome]:
        return {o.id: o for o in self.outcomes}

    def write(self, path: str | Path) -> None:
        header = {"mode": self.mode, "model": self.model, "model_family": self.model_family, "oracle": self.oracle}
        with open(path, "w") as fh:
            fh.write(json.dumps({"run": header}, sort_keys=True) + "\n")
            for o in sorted(self.outcomes, key=lambda o: o.id):
                fh.write(json.dumps(o.to_json(), sort_keys=True, ensure_ascii=False) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "PipelineRun":
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not lines or "run" not in json.loads(lines[0]):
            raise SchemaError(f"{path}: missing run header line")
        header = json.loads(lines[0])["run"]
        run = cls(header["mode"], header["model"], header["model_family"], header.get("oracle"))
        run.outcomes = [SampleOutcome.from_json(json.loads(ln)) for ln in lines[1:]]
        return run


def run_pipeline(
    corpus: Sequence[LoopSample],
    mode: str,
    client: LLMClient,
    oracle: str = ANNOTATION,
    annotations: Mapping[str, PatternDecision] | None = None,
    model_family: str = GENERIC,
    templates: TemplateSet = DEFAULT_TEMPLATES,
) -> PipelineRun:
    """Decide, prompt and generate for every sample.

    Guided mode consults the oracle first and skips the model entirely for
    loops judged non-parallel (output is the sequential code). Basic mode
    always asks the model. Generation failures are recorded per sample.
    """
    if mode not in (BASIC, GUIDED):
        raise ValueError(f"unknown mode {mode!r}")
    if oracle not in (ANNOTATION, HEURISTIC):
        raise ValueError(f"unknown oracle {oracle!r}")
    store = annotations if annotations is not None else gold_annotations(corpus)

    decisions: dict[str, PatternDecision | None] = {}
    prompts: dict[str, str] = {}
    for sample in corpus:
        if mode == BASIC:
            decisions[sample.id] = None
            prompts[sample.id] = render_basic(sample.sequential_code, model_family, templates).rendered
            continue
        if oracle == ANNOTATION:
            d = decide_from_annotation(sample.id, store)
        else:
            d = decide_heuristic(LoopSource(sample.id, sample.sequential_code))
        decisions[sample.id] = d
        if d.parallel:
            prompts[sample.id] = render_guided(sample.sequential_code, d, model_family, templates).rendered

    ids = [s.id for s in corpus if s.id in prompts]
    results = dict(zip(ids, client.generate_many([prompts[i] for i in ids])))

    run = PipelineRun(mode, client.cfg.model, model_family, oracle if mode == GUIDED else None)
    for sample in corpus:
        d = decisions[sample.id]
        if sample.id not in prompts:
            run.outcomes.append(SampleOutcome(sample.id, d, None, None, sample.sequential_code))
            continue
        res = results[sample.id]
        if isinstance(res, GenerationError):
            kind = "transport" if isinstance(res, TransportError) else type(res).__name__
            logger.error("sample %s: %s", sample.id, res)
            run.outcomes.append(
                SampleOutcome(sample.id, d, prompts[sample.id], None, "", f"{sample.id}: {res}", kind)
            )
        else:
            run.outcomes.append(SampleOutcome(sample.id, d, prompts[sample.id], res, res.code))
    return run


# ---------------------------------------------------------------- scoring


@dataclass(frozen=True)
class SampleScores:
    id: str
    benchmark: str
    app: str
    bleu: float
    rouge_l: float
    meteor: float
    ompscore: float
    body_bleu: float
    body_rouge_l: float
    body_meteor: float
    error: str | None = None

    def metric(self, name: str) -> float:
        return getattr(self, name)


@dataclass
class MetricReport:
    model: str
    mode: str
    rows: list[SampleScores]

    @property
    def errors(self) -> list[SampleScores]:
        return [r for r in self.rows if r.error]

    def aggregates(self) -> list[tuple[str, dict[str, float]]]:
        """Column means per benchmark, followed by the overall mean."""
        groups: dict[str, list[SampleScores]] = {}
        for r in self.rows:
            groups.setdefault(r.benchmark, []).append(r)
        out = []
        scopes = [(b, groups[b]) for b in sorted(groups)] + [("all", self.rows)]
        for scope, rows in scopes:
            if not rows:
                continue
            out.append((scope, {m: sum(r.metric(m) for r in rows) / len(rows) for m in METRIC_COLUMNS}))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "mode", "scope", "benchmark", "id", *METRIC_COLUMNS, *NOT_COMPUTED, "error"])
        for r in self.rows:
            writer.writerow(
                [self.model, self.mode, "sample", r.benchmark, r.id]
                + [f"{r.metric(m):.2f}" for m in METRIC_COLUMNS]
                + ["not computed"] * len(NOT_COMPUTED)
                + [r.error or ""]
            )
        for scope, means in self.aggregates():
            writer.writerow(
                [self.model, self.mode, "mean", scope if scope != "all" else "", ""]
                + [f"{means[m]:.2f}" for m in METRIC_COLUMNS]
                + ["not computed"] * len(NOT_COMPUTED)
                + [""]
            )
        return buf.getvalue()

    def to_markdown(self) -> str:
        label = f"{self.model} ({self.mode})"
        lines = [f"# Metric report: {label}", ""]
        lines += [
            "## Aggregates",
            "",
            "| Scope | Level | BLEU | CodeBLEU | Rouge-L | METEOR | CodeBERTScore | OMPScore |",
            "|---|---|---|---|---|---|---|---|",
        ]
        for scope, m in self.aggregates():
            lines.append(
                f"| {scope} | directive | {m['bleu']:.2f} | n/c | {m['rouge_l']:.2f} | {m['meteor']:.2f} "
                f"| n/c | {m['ompscore']:.2f} |"
            )
            lines.append(
                f"| {scope} | body | {m['body_bleu']:.2f} | n/c | {m['body_rouge_l']:.2f} "
                f"| {m['body_meteor']:.2f} | n/c | - |"
            )
        lines += ["", "n/c: not computed (needs external syntax or embedding models).", ""]
        lines += [
            "## Per sample",
            "",
            "| id | benchmark | BLEU | Rouge-L | METEOR | OMPScore | body BLEU | body Rouge-L | body METEOR |",
            "|---|---|---|---|---|---|---|---|---|",
        ]
        for r in self.rows:
            vals = " | ".join(f"{r.metric(m):.2f}" for m in METRIC_COLUMNS)
            lines.append(f"| {r.id} | {r.benchmark} | {vals} |")
        if self.errors:
            lines += ["", "## Errors", ""]
            lines += [f"- `{r.id}`: {r.error}" for r in self.errors]
        return "\n".join(lines) + "\n"


def _directive_line(code: str, registry: SensitivityRegistry) -> str | None:
    found = first_directive(code, registry)
    if found is None:
        return None
    return canonical_ws(found.text if isinstance(found, MalformedLine) else found.raw)


def _pair_metrics(cand: str | None, ref: str | None) -> tuple[float, float, float]:
    if cand is None and ref is None:
        return 100.0, 100.0, 100.0
    if cand is None or ref is None:
        return 0.0, 0.0, 0.0
    c, r = tokenize(cand), tokenize(ref)
    return bleu(c, [r]), rouge_l(c, r), meteor(c, r)


def score_sample(
    sample: LoopSample, output_code: str, registry: SensitivityRegistry = DEFAULT_REGISTRY
) -> SampleScores:
    cand_dir = _directive_line(output_code, registry)
    ref_dir = _directive_line(sample.reference_parallel_code, registry)
    d_bleu, d_rouge, d_meteor = _pair_metrics(cand_dir, ref_dir)
    cand_body = tokenize(strip_fences(output_code))
    ref_body = tokenize(sample.reference_parallel_code)
    return SampleScores(
        sample.id,
        sample.benchmark,
        sample.app,
        d_bleu,
        d_rouge,
        d_meteor,
        omp_score(output_code, sample.reference_parallel_code, registry),
        bleu(cand_body, [ref_body]),
        rouge_l(cand_body, ref_body),
        meteor(cand_body, ref_body),
    )


def score_run(
    run: PipelineRun, corpus: Sequence[LoopSample], registry: SensitivityRegistry = DEFAULT_REGISTRY
) -> MetricReport:
    """Score every corpus sample; failed generations score 0 and are listed as errors."""
    outcomes = run.by_id()
    rows = []
    for sample in sorted(corpus, key=lambda s: s.id):
        outcome = outcomes.get(sample.id)
        if outcome is None:
            raise MissingRecord(f"no pipeline output for sample {sample.id!r}")
        if outcome.error:
            rows.append(SampleScores(sample.id, sample.benchmark, sample.app, *([0.0] * 7), outcome.error))
        else:
            rows.append(score_sample(sample, outcome.output_code, registry))
    return MetricReport(run.model, run.mode, rows)


# ---------------------------------------------------------------- correlation


@dataclass(frozen=True)
class CorrelationRow:
    metric: str
    rho: float | None  # x100, two decimals
    note: str = ""


@dataclass
class CorrelationTable:
    n: int
    rows: list[CorrelationRow]

    def value(self, metric: str) -> float | None:
        return next(r.rho for r in self.rows if r.metric == metric)

    def to_markdown(self) -> str:
        lines = [
            f"Spearman correlation with human scores (n={self.n}, x100)",
            "",
            "| Metric | Spearman | Note |",
            "|---|---|---|",
        ]
        for r in self.rows:
            val = f"{r.rho:.2f}" if r.rho is not None else "-"
            lines.append(f"| {r.metric} | {val} | {r.note} |")
        return "\n".join(lines) + "\n"


def correlate(
    report: MetricReport, corpus: Sequence[LoopSample], metrics: Sequence[str] = METRIC_COLUMNS
) -> CorrelationTable:
    human = {s.id: s.human_score for s in corpus if s.human_score is not None}
    rows = [r for r in report.rows if r.id in human]
    if len(rows) < 2:
        raise DegenerateInput(f"need at least two human-scored samples, found {len(rows)}")
    ys = [human[r.id] for r in rows]
    out = []
    for m in metrics:
        try:
            rho = spearman([r.metric(m) for r in rows], ys)
        except DegenerateInput as exc:
            out.append(CorrelationRow(m, None, f"degenerate: {exc}"))
            continue
        out.append(CorrelationRow(m, round(rho * 100.0, 2)))
    return CorrelationTable(len(rows), out)


# ---------------------------------------------------------------- speedup


@dataclass
class ModelSpeedup:
    model: str
    benchmark: str
    pairs: list[RuntimePair]
    per_app: list[tuple[str, float]]
    average: float


@dataclass
class SpeedupTable:
    models: list[ModelSpeedup]

    def average(self, model: str, benchmark: str | None = None) -> float:
        for m in self.models:
            if m.model == model and (benchmark is None or m.benchmark == benchmark):
                return m.average
        raise KeyError(model)

    def to_markdown(self) -> str:
        out = []
        benchmarks = list(dict.fromkeys(m.benchmark for m in self.models))
        for bench in benchmarks:
            group = [m for m in self.models if m.benchmark == bench]
            apps = list(dict.fromkeys(p.app for m in group for p in m.pairs))
            if bench:
                out += [f"## {bench}", ""]
            out.append("| Model | " + " | ".join(apps) + " | Avg. Speedup (%) |")
            out.append("|---" * (len(apps) + 2) + "|")
            for m in group:
                times = {p.app: p for p in m.pairs}
                basic = [f"{times[a].time_basic:.3f}" if a in times else "" for a in apps]
                guided = [f"{times[a].time_guided:.3f}" if a in times else "" for a in apps]
                out.append(f"| {m.model} | " + " | ".join(basic) + " | |")
                out.append(f"| {m.model} (guided) | " + " | ".join(guided) + f" | {m.average:.1f}% |")
            out.append("")
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["benchmark", "model", "app", "time_basic", "time_guided", "speedup_percent"])
        for m in self.models:
            for p, (_, s) in zip(m.pairs, m.per_app):
                writer.writerow([m.benchmark, m.model, p.app, p.time_basic, p.time_guided, f"{s:.4f}"])
            writer.writerow([m.benchmark, m.model, "AVERAGE", "", "", f"{m.average:.4f}"])
        return buf.getvalue()


def parse_runtime_csv(text: str) -> list[tuple[str, str, RuntimePair]]:
    reader = csv.DictReader(io.StringIO(text))
    required = {"model", "app", "time_basic", "time_guided"}
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        raise SchemaError(f"runtime CSV needs columns {sorted(required)}, got {reader.fieldnames}")
    rows = []
    for lineno, row in enumerate(reader, 2):
        try:
            pair = RuntimePair(row["app"], float(row["time_basic"]), float(row["time_guided"]))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: {exc}", field="time_basic/time_guided") from exc
        if not row["model"] or not row["app"]:
            raise SchemaError(f"line {lineno}: empty model or app")
        rows.append(((row.get("benchmark") or "").strip(), row["model"].strip(), pair))
    return rows


def speedup_report(path: str | Path) -> SpeedupTable:
    """Per-model speedups from a runtime CSV file."""
    return speedup_table(Path(path).read_text())


def speedup_table(text: str) -> SpeedupTable:
    grouped: dict[tuple[str, str], list[RuntimePair]] = {}
    for bench, model, pair in parse_runtime_csv(text):
        grouped.setdefault((bench, model), []).append(pair)
    models = []
    for (bench, model), pairs in grouped.items():
        per_app, avg = speedup_percent(pairs)
        models.append(ModelSpeedup(model, bench, pairs, per_app, avg))
    return SpeedupTable(models)


# ---------------------------------------------------------------- classifier


TASKS = ("parallel", "private", "reduction")


def _task_label(d: PatternDecision, task: str) -> bool:
    if task == "parallel":
        return d.parallel
    if task == "private":
        return bool(d.private_vars)
    return bool(d.reductions)


@dataclass
class ClassifierReport:
    counts: dict[str, ConfusionCounts]

    def accuracy(self, task: str) -> float:
        return accuracy(self.counts[task])

    def to_markdown(self) -> str:
        lines = ["| Task | TP | TN | FP | FN | Accuracy (%) |", "|---|---|---|---|---|---|"]
        for task, c in self.counts.items():
            lines.append(f"| {task} | {c.tp} | {c.tn} | {c.fp} | {c.fn} | {accuracy(c):.2f} |")
        return "\n".join(lines) + "\n"


def classifier_report(decisions: Mapping[str, PatternDecision], corpus: Sequence[LoopSample]) -> ClassifierReport:
    missing = [s.id for s in corpus if s.id not in decisions]
    if missing:
        raise MissingRecord(f"no decision for samples {missing}")
    counts = {}
    for task in TASKS:
        gold = [_task_label(s.gold, task) for s in corpus]
        pred = [_task_label(decisions[s.id], task) for s in corpus]
        counts[task] = ConfusionCounts.from_labels(gold, pred)
    return ClassifierReport(counts)
