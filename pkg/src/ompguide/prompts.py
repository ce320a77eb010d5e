"""Prompt templates for basic and pattern-guided OpenMP generation.

The built-in templates keep the original wording byte for byte, including
the "parallalizable" misspelling; ``fix_typos=True`` swaps in the corrected
word. ``{code}`` and ``{clause}`` are substituted in a single pass, so
placeholder-looking text inside the code is never re-expanded.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import NotParallel
from .oracle import PatternDecision, pattern_label

GENERIC = "generic"
CODELLAMA_CHAT = "codellama-chat"
MODEL_FAMILIES = (GENERIC, CODELLAMA_CHAT)

_INTRO = "Act as a C++ OpenMP Parallelization Tool. You will be given a code."
_BASIC_TASK = (
    " Your task is to parallelize the code using OpenMP. You can add any OpenMP clauses"
    " if necessary. If the code is not parallalizable, output the original given code."
)
_GUIDED_TASK = " Your task is to parallelize the code using OpenMP and only output the code."
_CLAUSE_SENTENCE = " Add {clause} to the loop."

BASIC_TEMPLATE = _INTRO + _BASIC_TASK + "\n Code: {code}\n Output code: "
GUIDED_TEMPLATE = _INTRO + _GUIDED_TASK + _CLAUSE_SENTENCE + "\n Code: {code}\n Output Code:"
CODELLAMA_GUIDED_TEMPLATE = (
    "<s>[INST] <<SYS>> " + _INTRO + _GUIDED_TASK + _CLAUSE_SENTENCE
    + " <</SYS>>\n\n Code: {code}\n Output Code: [/INST]"
)
CODELLAMA_BASIC_TEMPLATE = (
    "<s>[INST] <<SYS>> " + _INTRO + _BASIC_TASK + " <</SYS>>\n\n Code: {code}\n Output code: [/INST]"
)

_PLACEHOLDER_RE = re.compile(r"\{(code|clause)\}")


@dataclass(frozen=True)
class PromptSpec:
    kind: str  # "basic" | "guided"
    model_family: str
    code: str
    rendered: str
    clause_text: str = ""


@dataclass(frozen=True)
class TemplateSet:
    basic: str = BASIC_TEMPLATE
    guided: str = GUIDED_TEMPLATE
    codellama_basic: str = CODELLAMA_BASIC_TEMPLATE
    codellama_guided: str = CODELLAMA_GUIDED_TEMPLATE
    clause_detail: str = "full"  # "full" | "name-only"
    fix_typos: bool = False

    @classmethod
    def from_files(cls, clause_detail: str = "full", fix_typos: bool = False, **paths: str | Path | None):
        """Override any template with the contents of a text file."""
        loaded = {k: Path(v).read_text() for k, v in paths.items() if v is not None}
        unknown = set(loaded) - {"basic", "guided", "codellama_basic", "codellama_guided"}
        if unknown:
            raise ValueError(f"unknown template names: {sorted(unknown)}")
        return cls(**loaded, clause_detail=clause_detail, fix_typos=fix_typos)

    def template(self, kind: str, family: str) -> str:
        if family not in MODEL_FAMILIES:
            raise ValueError(f"unknown model family {family!r}")
        if family == CODELLAMA_CHAT:
            text = self.codellama_guided if kind == "guided" else self.codellama_basic
        else:
            text = self.guided if kind == "guided" else self.basic
        if self.fix_typos:
            text = text.replace("parallalizable", "parallelizable")
        return text


DEFAULT_TEMPLATES = TemplateSet()


def substitute(template: str, **values: str) -> str:
    return _PLACEHOLDER_RE.sub(lambda m: values.get(m.group(1), m.group(0)), template)


def render_clause_text(d: PatternDecision, detail: str = "full") -> str:
    """Clause phrase for the guided prompt; empty for do-all loops.

    >>> render_clause_text(PatternDecision(True, ("i",)))
    'private(i)'
    """
    if not d.parallel:
        raise NotParallel("no clause text for a non-parallel loop")
    if detail == "name-only":
        label = pattern_label(d)
        return "" if label == "do-all" else label.replace("-", " ")
    if detail != "full":
        raise ValueError(f"unknown clause detail {detail!r}")
    parts = []
    if d.private_vars:
        parts.append(f"private({','.join(d.private_vars)})")
    parts.extend(f"reduction({op}:{','.join(vs)})" for op, vs in d.reductions.items())
    return " ".join(parts)


def render_basic(code: str, model_family: str = GENERIC, templates: TemplateSet = DEFAULT_TEMPLATES) -> PromptSpec:
    rendered = substitute(templates.template("basic", model_family), code=code)
    return PromptSpec("basic", model_family, code, rendered)


def render_guided(
    code: str,
    d: PatternDecision,
    model_family: str = GENERIC,
    templates: TemplateSet = DEFAULT_TEMPLATES,
) -> PromptSpec:
    if not d.parallel:
        raise NotParallel("guided prompts are only built for parallel loops")
    clause = render_clause_text(d, templates.clause_detail)
    template = templates.template("guided", model_family)
    if not clause:
        template = template.replace(_CLAUSE_SENTENCE, "")
    rendered = substitute(template, code=code, clause=clause)
    return PromptSpec("guided", model_family, code, rendered, clause)
