"""OMPScore: ROUGE-L over OpenMP directives after order normalization.

The score runs four stages over both candidate and reference directives:
masking finds clause spans, categorization reads the clause type from the
first word of each span, the update stage sorts the argument list of
order-insensitive clauses, and the rewritten directives are scored with
ROUGE-L over :func:`ompguide.metrics.tokenize` tokens.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable

from .clauses import DEFAULT_REGISTRY, Sensitivity, SensitivityRegistry
from .directive import (
    Directive,
    MalformedLine,
    canonical_ws,
    first_directive,
    make_clause,
    scan,
    split_kind,
)
from .errors import DegenerateInput, MalformedDirective
from .metrics import rouge_l, tokenize

__all__ = [
    "ClauseSpan",
    "Sensitivity",
    "SensitivityRegistry",
    "DEFAULT_REGISTRY",
    "mask_clauses",
    "categorize",
    "update_clause",
    "normalize_directive_text",
    "omp_score",
    "omp_score_batch",
]

_FIRST_WORD_RE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)")


@dataclass(frozen=True)
class ClauseSpan:
    start: int
    end: int
    text: str


def mask_clauses(text: str) -> list[ClauseSpan]:
    """Spans of every clause in a directive line, in source order."""
    _, groups = scan(text)
    n_kind = split_kind(groups)
    spans = []
    if groups[0].args is not None:
        # e.g. critical(name): the parenthesized part is the only clause-like span
        g = groups[0]
        spans.append(ClauseSpan(g.start, g.end, text[g.start : g.end]))
    for g in groups[n_kind:]:
        spans.append(ClauseSpan(g.start, g.end, text[g.start : g.end]))
    return spans


def categorize(span: ClauseSpan | str) -> str:
    text = span.text if isinstance(span, ClauseSpan) else span
    m = _FIRST_WORD_RE.match(text)
    if m is None:
        raise MalformedDirective(f"clause span without a keyword: {text!r}")
    return m.group(1).lower()


def update_clause(span: ClauseSpan | str, registry: SensitivityRegistry = DEFAULT_REGISTRY) -> str:
    """Normalized text of one clause span.

    Order-insensitive clauses get their items sorted byte-wise; everything
    else only has its whitespace canonicalized.
    """
    text = span.text if isinstance(span, ClauseSpan) else span
    m = _FIRST_WORD_RE.match(text)
    if m is None:
        raise MalformedDirective(f"clause span without a keyword: {text!r}")
    word = m.group(1)
    rest = text[m.end() :].strip()
    args = None
    if rest:
        if not (rest.startswith("(") and rest.endswith(")")):
            raise MalformedDirective(f"unexpected clause text {text!r}")
        args = rest[1:-1]
    clause = make_clause(word, args, registry)
    if clause.parenthesized and registry.is_order_insensitive(clause.keyword):
        clause = replace(clause, items=tuple(sorted(clause.items, key=lambda s: s.encode("utf-8"))))
    return clause.render()


def normalize_directive_text(text: str, registry: SensitivityRegistry = DEFAULT_REGISTRY) -> str:
    """Apply mask, categorize and update to a directive line.

    Text outside clause spans is left in place; whitespace is canonicalized
    at the end so tokenization sees one consistent form.
    """
    pieces = []
    pos = 0
    for span in mask_clauses(text):
        categorize(span)
        pieces.append(text[pos : span.start])
        pieces.append(update_clause(span, registry))
        pos = span.end
    pieces.append(text[pos:])
    return canonical_ws("".join(pieces))


def _directive_tokens(found: Directive | MalformedLine, registry: SensitivityRegistry) -> list[str]:
    if isinstance(found, MalformedLine):
        return tokenize(canonical_ws(found.text))
    return tokenize(normalize_directive_text(found.raw, registry))


def omp_score(
    candidate: str, reference: str, registry: SensitivityRegistry = DEFAULT_REGISTRY
) -> float:
    """Similarity of the first directive in ``candidate`` to the first in ``reference``.

    Both sides accept raw code or a bare pragma line. When neither side has
    a directive the candidate correctly declined to parallelize and scores
    100; a directive on exactly one side scores 0.
    """
    cand = first_directive(candidate, registry)
    ref = first_directive(reference, registry)
    if cand is None and ref is None:
        return 100.0
    if cand is None or ref is None:
        return 0.0
    return rouge_l(_directive_tokens(cand, registry), _directive_tokens(ref, registry))


def omp_score_batch(
    pairs: Iterable[tuple[str, str]], registry: SensitivityRegistry = DEFAULT_REGISTRY
) -> tuple[list[float], float]:
    """Per-pair OMPScore and their mean rounded to two decimals."""
    scores = [omp_score(c, r, registry) for c, r in pairs]
    if not scores:
        raise DegenerateInput("empty OMPScore batch")
    return scores, round(sum(scores) / len(scores), 2)
