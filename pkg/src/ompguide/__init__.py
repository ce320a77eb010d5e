"""Pattern-guided OpenMP prompting and directive-aware scoring."""
from importlib import resources
from pathlib import Path

from .clauses import DEFAULT_REGISTRY, Sensitivity, SensitivityRegistry
from .directive import Clause, Directive, MalformedLine, extract_directives, parse_directive, render_directive
from .errors import (
    ApiError,
    DegenerateInput,
    GenerationError,
    MalformedDirective,
    MissingRecord,
    NotParallel,
    OmpGuideError,
    ReplayMiss,
    SchemaError,
    TransportError,
    UnknownSample,
    UnsupportedLoop,
)
from .harness import (
    LoopSample,
    PipelineRun,
    classifier_report,
    correlate,
    load_corpus,
    run_pipeline,
    score_run,
    speedup_report,
)
from .llm import GenerationConfig, GenerationRecord, LLMClient, generate, record_replay
from .metrics import ConfusionCounts, RuntimePair, accuracy, bleu, meteor, rouge_l, spearman, speedup_percent, tokenize
from .ompscore import omp_score, omp_score_batch
from .oracle import AnnotationStore, LoopSource, PatternDecision, analyze_loop, decide_from_annotation, decide_heuristic
from .prompts import PromptSpec, TemplateSet, render_basic, render_guided

__version__ = "0.1.0"


def data_path(name: str = "") -> Path:
    """Path to a bundled fixture (corpus.jsonl, replay/, runtimes_*.csv)."""
    return Path(str(resources.files(__name__) / "data")) / name
