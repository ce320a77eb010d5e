"""Parsing and canonical rendering of ``#pragma omp`` lines."""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .clauses import (
    CLAUSE_KEYWORDS,
    DEFAULT_REGISTRY,
    DIRECTIVE_WORDS,
    Sensitivity,
    SensitivityRegistry,
)
from .errors import MalformedDirective

PRAGMA_RE = re.compile(r"#\s*pragma\s+omp\b", re.IGNORECASE)
_PRAGMA_LINE_RE = re.compile(r"^\s*#\s*pragma\s+omp\b", re.IGNORECASE)
_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_WS_RE = re.compile(r"\s+")
_OPEN = "(["
_CLOSE = ")]"


def canonical_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


@dataclass(frozen=True)
class Clause:
    keyword: str
    args_raw: str = ""
    items: tuple[str, ...] = ()
    modifier: str | None = None
    parenthesized: bool = False
    sensitivity: Sensitivity = Sensitivity.ORDER_SENSITIVE

    def render(self) -> str:
        if not self.parenthesized:
            return self.keyword
        head = f"{self.modifier}:" if self.modifier is not None else ""
        return f"{self.keyword}({head}{','.join(self.items)})"


@dataclass(frozen=True)
class Directive:
    kind: str
    clauses: tuple[Clause, ...] = ()
    raw: str = field(default="", compare=False)

    def render(self) -> str:
        return render_directive(self)


@dataclass(frozen=True)
class MalformedLine:
    """A ``#pragma omp`` line that could not be parsed, kept verbatim."""

    text: str
    reason: str


@dataclass(frozen=True)
class RawGroup:
    """One word of the pragma body, optionally followed by a parenthesized group.

    ``start``/``end`` are offsets into the text handed to :func:`scan`.
    """

    word: str
    args: str | None
    start: int
    end: int


def _close_paren(text: str, open_pos: int) -> int:
    """Index of the parenthesis closing the one at ``open_pos``."""
    stack: list[str] = []
    for pos in range(open_pos, len(text)):
        ch = text[pos]
        if ch in _OPEN:
            stack.append(ch)
        elif ch in _CLOSE:
            if not stack or _OPEN.index(stack.pop()) != _CLOSE.index(ch):
                raise MalformedDirective(f"unbalanced parentheses in {text.strip()!r}")
            if not stack:
                return pos
    raise MalformedDirective(f"unbalanced parentheses in {text.strip()!r}")


def scan(text: str) -> tuple[int, list[RawGroup]]:
    """Split the text after ``#pragma omp`` into word groups.

    Returns the offset where the pragma body starts and the groups in
    source order. Comments end the scan.
    """
    m = PRAGMA_RE.search(text)
    if m is None:
        raise MalformedDirective(f"missing '#pragma omp' in {text.strip()!r}")
    pos = m.end()
    groups: list[RawGroup] = []
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace() or (ch == "," and groups):
            pos += 1
            continue
        if text.startswith("//", pos):
            break
        if text.startswith("/*", pos):
            end = text.find("*/", pos + 2)
            if end < 0:
                break
            pos = end + 2
            continue
        if ch == "\\" and not text[pos + 1 :].strip():
            break
        wm = _WORD_RE.match(text, pos)
        if wm is None:
            if ch in _CLOSE:
                raise MalformedDirective(f"unbalanced parentheses in {text.strip()!r}")
            raise MalformedDirective(f"unexpected {ch!r} at offset {pos} in {text.strip()!r}")
        look = wm.end()
        while look < n and text[look] in " \t":
            look += 1
        if look < n and text[look] == "(":
            close = _close_paren(text, look)
            groups.append(RawGroup(wm.group(0), text[look + 1 : close], wm.start(), close + 1))
            pos = close + 1
        else:
            groups.append(RawGroup(wm.group(0), None, wm.start(), wm.end()))
            pos = wm.end()
    if not groups:
        raise MalformedDirective(f"missing directive name in {text.strip()!r}")
    return m.end(), groups


def split_kind(groups: list[RawGroup]) -> int:
    """Number of leading groups that form the directive kind."""
    count = 1
    for group in groups[1:]:
        word = group.word.lower()
        if group.args is not None or word not in DIRECTIVE_WORDS or word in CLAUSE_KEYWORDS:
            break
        count += 1
    return count


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for pos, ch in enumerate(text):
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append(text[start:pos])
            start = pos + 1
    parts.append(text[start:])
    return parts


def _first_top_colon(text: str) -> int:
    depth = 0
    for pos, ch in enumerate(text):
        if ch in _OPEN:
            depth += 1
        elif ch in _CLOSE:
            depth -= 1
        elif ch == ":" and depth == 0:
            # '::' is a C++ scope operator, never a modifier separator
            if text[pos + 1 : pos + 2] == ":" or text[pos - 1 : pos] == ":":
                continue
            return pos
    return -1


def make_clause(
    word: str, args: str | None, registry: SensitivityRegistry = DEFAULT_REGISTRY
) -> Clause:
    keyword = word.lower()
    sensitivity = registry.lookup(keyword)
    if args is None:
        return Clause(keyword, sensitivity=sensitivity)
    args_raw = args.strip()
    modifier = None
    rest = args_raw
    colon = _first_top_colon(args_raw)
    if colon >= 0:
        modifier = canonical_ws(args_raw[:colon])
        rest = args_raw[colon + 1 :]
    items = tuple(canonical_ws(item) for item in _split_top(rest, ",")) if rest.strip() else ()
    return Clause(keyword, args_raw, items, modifier, True, sensitivity)


def parse_directive(text: str, registry: SensitivityRegistry = DEFAULT_REGISTRY) -> Directive:
    """Parse one pragma line into a :class:`Directive`.

    >>> d = parse_directive("#pragma omp parallel for private(i)")
    >>> d.kind, [c.render() for c in d.clauses]
    ('parallel for', ['private(i)'])
    """
    _, groups = scan(text)
    n_kind = split_kind(groups)
    kind = " ".join(g.word.lower() for g in groups[:n_kind])
    clauses = []
    if groups[0].args is not None:
        clauses.append(make_clause(groups[0].word, groups[0].args, registry))
    clauses.extend(make_clause(g.word, g.args, registry) for g in groups[n_kind:])
    return Directive(kind, tuple(clauses), text.strip())


def render_directive(d: Directive) -> str:
    parts = ["#pragma omp", d.kind]
    parts.extend(c.render() for c in d.clauses)
    return " ".join(p for p in parts if p)


def with_clauses(d: Directive, clauses) -> Directive:
    return replace(d, clauses=tuple(clauses))


def strip_fences(code: str) -> str:
    """Blank out Markdown fence lines, keeping line numbering intact."""
    lines = code.split("\n")
    return "\n".join("" if line.lstrip().startswith("```") else line for line in lines)


def extract_directives(
    code: str, registry: SensitivityRegistry = DEFAULT_REGISTRY
) -> list[tuple[Directive | MalformedLine, int]]:
    """Every ``#pragma omp`` line of ``code`` with its 0-based line index.

    Lines that fail to parse come back as :class:`MalformedLine`.
    """
    lines = strip_fences(code).split("\n")
    found: list[tuple[Directive | MalformedLine, int]] = []
    idx = 0
    while idx < len(lines):
        start = idx
        line = lines[idx]
        while line.rstrip().endswith("\\") and idx + 1 < len(lines):
            idx += 1
            line = line.rstrip()[:-1] + " " + lines[idx]
        idx += 1
        if not _PRAGMA_LINE_RE.match(line):
            continue
        try:
            found.append((parse_directive(line, registry), start))
        except MalformedDirective as exc:
            found.append((MalformedLine(line.strip(), str(exc)), start))
    return found


def first_directive(
    code: str, registry: SensitivityRegistry = DEFAULT_REGISTRY
) -> Directive | MalformedLine | None:
    found = extract_directives(code, registry)
    return found[0][0] if found else None
