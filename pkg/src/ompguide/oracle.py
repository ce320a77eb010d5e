"""Parallelism and pattern decisions for loops.

Two backends produce a :class:`PatternDecision`: an annotation store (hard
labels per sample id, JSONL) and a small rule-based analyzer for simple C
loops. The analyzer works on tokens and brace-aware statements; it is not
a C parser and falls back to "not parallel" whenever it cannot follow the
loop body.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

from .errors import SchemaError, UnknownSample, UnsupportedLoop

logger = logging.getLogger(__name__)

NON_PARALLEL = "non-parallel"
DO_ALL = "do-all"
PRIVATE = "private"
REDUCTION = "reduction"
REDUCTION_AND_PRIVATE = "reduction-and-private"
PATTERN_LABELS = (NON_PARALLEL, DO_ALL, PRIVATE, REDUCTION, REDUCTION_AND_PRIVATE)


@dataclass(frozen=True)
class PatternDecision:
    parallel: bool
    private_vars: tuple[str, ...] = ()
    reductions: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    source: str = "annotation"
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        # the cascade never reports clauses for a loop it rejected
        if not self.parallel:
            object.__setattr__(self, "private_vars", ())
            object.__setattr__(self, "reductions", {})
        else:
            object.__setattr__(self, "private_vars", tuple(dict.fromkeys(self.private_vars)))
            object.__setattr__(
                self,
                "reductions",
                {op: tuple(dict.fromkeys(vs)) for op, vs in self.reductions.items() if vs},
            )

    @property
    def label(self) -> str:
        return pattern_label(self)

    def to_json(self) -> dict:
        return {
            "parallel": self.parallel,
            "private": list(self.private_vars),
            "reduction": {op: list(vs) for op, vs in self.reductions.items()},
            "source": self.source,
            "pattern": self.label,
            **({"notes": list(self.notes)} if self.notes else {}),
        }

    @classmethod
    def from_json(cls, obj: Mapping, source: str = "annotation", sample_id: str | None = None):
        if not isinstance(obj.get("parallel"), bool):
            raise SchemaError("'parallel' must be a boolean", sample_id, "parallel")
        private = obj.get("private", []) or []
        reduction = obj.get("reduction", {}) or {}
        if not isinstance(private, list) or not all(isinstance(v, str) for v in private):
            raise SchemaError("'private' must be a list of names", sample_id, "private")
        if not isinstance(reduction, dict) or not all(
            isinstance(vs, list) and all(isinstance(v, str) for v in vs) for vs in reduction.values()
        ):
            raise SchemaError("'reduction' must map operators to name lists", sample_id, "reduction")
        return cls(obj["parallel"], tuple(private), {op: tuple(vs) for op, vs in reduction.items()}, source)


def pattern_label(d: PatternDecision) -> str:
    if not d.parallel:
        return NON_PARALLEL
    if d.private_vars and d.reductions:
        return REDUCTION_AND_PRIVATE
    if d.reductions:
        return REDUCTION
    if d.private_vars:
        return PRIVATE
    return DO_ALL


# ---------------------------------------------------------------- annotations


class AnnotationStore(dict):
    """Sample id -> PatternDecision, loaded from JSONL."""

    @classmethod
    def load(cls, path: str | Path) -> "AnnotationStore":
        store = cls()
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: {exc}") from exc
            sid = obj.get("id")
            if not isinstance(sid, str) or not sid:
                raise SchemaError(f"line {lineno}: missing 'id'", field="id")
            if sid in store:
                raise SchemaError("duplicate id", sid, "id")
            store[sid] = PatternDecision.from_json(obj, "annotation", sid)
        return store

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for sid, d in self.items():
                obj = {"id": sid, **d.to_json()}
                obj.pop("source")
                obj.pop("pattern")
                fh.write(json.dumps(obj) + "\n")


def decide_from_annotation(sample_id: str, store: Mapping[str, PatternDecision]) -> PatternDecision:
    try:
        d = store[sample_id]
    except KeyError:
        raise UnknownSample(f"no annotation for sample {sample_id!r}") from None
    return PatternDecision(d.parallel, d.private_vars, d.reductions, "annotation")


# ---------------------------------------------------------------- C tokens

_C_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<pre>\#[^\n]*)
  | (?P<str>"(?:\\.|[^"\\])*"|'(?:\\.|[^'\\])*')
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?[fFlLuU]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><<=|>>=|->|\+\+|--|&&|\|\||==|!=|<=|>=|\+=|-=|\*=|/=|%=|&=|\|=|\^=|<<|>>|[-+*/%&|^!~<>=?:;,.(){}\[\]])
    """,
    re.VERBOSE | re.DOTALL,
)

TYPE_WORDS = frozenset(
    "int double float char long short unsigned signed const static register volatile "
    "size_t bool _Bool void struct enum auto int32_t int64_t uint32_t uint64_t".split()
)
C_KEYWORDS = TYPE_WORDS | frozenset(
    "if else for while do return break continue goto switch case default sizeof".split()
)
PURE_FUNCTIONS = frozenset(
    "sqrt sqrtf exp expf log logf log10 pow powf fabs fabsf abs labs sin cos tan asin acos atan "
    "atan2 sinh cosh tanh floor ceil fmod fmin fmax min max MIN MAX cbrt round trunc".split()
)
ASSIGN_OPS = frozenset("= += -= *= /= %= &= |= ^= <<= >>=".split())
REDUCTION_OPS = ("+", "-", "*", "&", "|", "^", "&&", "||")
_PRECEDENCE = {
    "*": 10, "/": 10, "%": 10,
    "+": 9, "-": 9,
    "<<": 8, ">>": 8,
    "<": 7, ">": 7, "<=": 7, ">=": 7,
    "==": 6, "!=": 6,
    "&": 5, "^": 4, "|": 3, "&&": 2, "||": 1, "?": 0,
}


def _is_name(tok: str) -> bool:
    return bool(re.match(r"[A-Za-z_]", tok)) and tok not in C_KEYWORDS


def c_tokens(code: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(code):
        m = _C_TOKEN_RE.match(code, pos)
        if m is None:
            raise UnsupportedLoop(f"cannot tokenize near {code[pos:pos + 20]!r}")
        pos = m.end()
        if m.lastgroup in ("ws", "comment", "pre"):
            continue
        tokens.append(m.group(0))
    return tokens


def _match(tokens: list[str], start: int, open_: str, close: str) -> int:
    depth = 0
    for pos in range(start, len(tokens)):
        if tokens[pos] == open_:
            depth += 1
        elif tokens[pos] == close:
            depth -= 1
            if depth == 0:
                return pos
    raise UnsupportedLoop(f"unbalanced {open_!r}")


def _split_top(tokens: list[str], sep: str) -> list[list[str]]:
    parts: list[list[str]] = [[]]
    depth = 0
    for tok in tokens:
        if tok in "([{":
            depth += 1
        elif tok in ")]}":
            depth -= 1
        if tok == sep and depth == 0:
            parts.append([])
        else:
            parts[-1].append(tok)
    return parts


# ---------------------------------------------------------------- statements


@dataclass
class Simple:
    tokens: list[str]


@dataclass
class Decl:
    tokens: list[str]


@dataclass
class For:
    init: list[str]
    cond: list[str]
    incr: list[str]
    body: list


@dataclass
class If:
    cond: list[str]
    then: list
    orelse: list


@dataclass
class While:
    cond: list[str]
    body: list


@dataclass
class Jump:
    word: str


def _parse_statements(tokens: list[str]) -> list:
    out = []
    pos = 0
    while pos < len(tokens):
        stmt, pos = _parse_statement(tokens, pos)
        if stmt is not None:
            out.append(stmt)
    return out


def _parse_statement(tokens: list[str], pos: int):
    tok = tokens[pos]
    if tok == ";":
        return None, pos + 1
    if tok == "{":
        end = _match(tokens, pos, "{", "}")
        return _Block(_parse_statements(tokens[pos + 1 : end])), end + 1
    if tok == "for":
        if pos + 1 >= len(tokens) or tokens[pos + 1] != "(":
            raise UnsupportedLoop("malformed for header")
        close = _match(tokens, pos + 1, "(", ")")
        header = _split_top(tokens[pos + 2 : close], ";")
        if len(header) != 3:
            raise UnsupportedLoop("for header without three parts")
        body, nxt = _parse_body(tokens, close + 1)
        return For(header[0], header[1], header[2], body), nxt
    if tok == "while":
        close = _match(tokens, pos + 1, "(", ")")
        body, nxt = _parse_body(tokens, close + 1)
        return While(tokens[pos + 2 : close], body), nxt
    if tok == "if":
        close = _match(tokens, pos + 1, "(", ")")
        then, nxt = _parse_body(tokens, close + 1)
        orelse: list = []
        if nxt < len(tokens) and tokens[nxt] == "else":
            orelse, nxt = _parse_body(tokens, nxt + 1)
        return If(tokens[pos + 2 : close], then, orelse), nxt
    if tok in ("do", "switch"):
        raise UnsupportedLoop(f"'{tok}' statements are not analyzed")
    if tok in ("break", "return", "goto", "continue"):
        end = _stmt_end(tokens, pos)
        return Jump(tok), end + 1
    end = _stmt_end(tokens, pos)
    body = tokens[pos:end]
    if body and (body[0] in TYPE_WORDS):
        return Decl(body), end + 1
    return Simple(body), end + 1


class _Block(list):
    pass


def _parse_body(tokens: list[str], pos: int) -> tuple[list, int]:
    if pos >= len(tokens):
        raise UnsupportedLoop("missing loop or branch body")
    stmt, nxt = _parse_statement(tokens, pos)
    if stmt is None:
        return [], nxt
    return (list(stmt) if isinstance(stmt, _Block) else [stmt]), nxt


def _stmt_end(tokens: list[str], pos: int) -> int:
    depth = 0
    for k in range(pos, len(tokens)):
        tok = tokens[k]
        if tok in "([":
            depth += 1
        elif tok in ")]":
            depth -= 1
        elif tok == "{" or tok == "}":
            raise UnsupportedLoop("brace inside expression statement")
        elif tok == ";" and depth == 0:
            return k
    raise UnsupportedLoop("statement without terminating ';'")


# ---------------------------------------------------------------- accesses


@dataclass(frozen=True)
class Access:
    name: str
    write: bool
    subscripts: tuple[tuple[str, ...], ...] | None  # None for scalars
    conditional: bool
    stmt: int
    in_index: bool = False


@dataclass
class _LoopFacts:
    iv: str
    accesses: list[Access] = field(default_factory=list)
    declared: set[str] = field(default_factory=set)
    reduction_stmts: dict[int, tuple[str, str]] = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)
    stmt_counter: int = 0


def _references(
    tokens: list[str], in_index: bool = False
) -> Iterator[tuple[str, tuple | None, int, int, bool]]:
    """Yield (name, subscripts, start, end, in_index) per memory reference.

    Subscript contents are yielded as well (they are reads) with
    ``in_index`` set. Function names are never yielded as locations;
    unknown calls come back with name '<call:NAME>'.
    """
    pos = 0
    while pos < len(tokens):
        tok = tokens[pos]
        if not _is_name(tok) or (pos > 0 and tokens[pos - 1] in (".", "->")):
            pos += 1
            continue
        if pos + 1 < len(tokens) and tokens[pos + 1] == "(":
            close = _match(tokens, pos + 1, "(", ")")
            if tok not in PURE_FUNCTIONS:
                yield f"<call:{tok}>", None, pos, close + 1, in_index
            for n, s, a, b, ix in _references(tokens[pos + 2 : close], in_index):
                yield n, s, a + pos + 2, b + pos + 2, ix
            pos = close + 1
            continue
        start = pos
        name = tok
        subs: list[tuple[str, ...]] = []
        pos += 1
        while pos < len(tokens) and tokens[pos] in ("[", ".", "->"):
            if tokens[pos] == "[":
                close = _match(tokens, pos, "[", "]")
                inner = tokens[pos + 1 : close]
                for n, s, a, b, _ in _references(inner, True):
                    yield n, s, a + pos + 1, b + pos + 1, True
                subs.append(tuple(inner))
                pos = close + 1
            else:
                if pos + 1 >= len(tokens):
                    break
                if not subs:
                    name = f"{name}{tokens[pos]}{tokens[pos + 1]}"
                pos += 2
        yield name, (tuple(subs) if subs else None), start, pos, in_index


class _Walker:
    def __init__(self, facts: _LoopFacts):
        self.f = facts

    def reads(self, tokens: list[str], cond: bool, stmt: int) -> None:
        for name, subs, start, end, ix in _references(tokens):
            if name.startswith("<call:"):
                self.f.problems.append(f"call to unknown function {name[6:-1]}()")
                continue
            self.f.accesses.append(Access(name, False, subs, cond, stmt, ix))
            # embedded ++/-- also write the location
            if (end < len(tokens) and tokens[end] in ("++", "--")) or (
                start > 0 and tokens[start - 1] in ("++", "--")
            ):
                self.f.accesses.append(Access(name, True, subs, cond, stmt, ix))

    def write_target(self, lhs: list[str], cond: bool, stmt: int, also_read: bool) -> None:
        if lhs and lhs[0] == "*":
            self.f.problems.append("write through pointer dereference")
            return
        refs = list(_references(lhs))
        outer = [r for r in refs if r[2] == 0 and r[3] == len(lhs)]
        if not outer or outer[0][0].startswith("<call:"):
            self.f.problems.append(f"unsupported assignment target {' '.join(lhs)!r}")
            return
        target = outer[0]
        for ref in refs:
            if ref != target:
                self.f.accesses.append(Access(ref[0], False, ref[1], cond, stmt, ref[4]))
        name, subs, _, _, _ = target
        if also_read:
            self.f.accesses.append(Access(name, False, subs, cond, stmt))
        self.f.accesses.append(Access(name, True, subs, cond, stmt))

    def next_stmt(self) -> int:
        self.f.stmt_counter += 1
        return self.f.stmt_counter - 1

    def simple(self, tokens: list[str], cond: bool) -> None:
        stmt = self.next_stmt()
        red = _reduction_form(tokens)
        if red is not None:
            self.f.reduction_stmts[stmt] = red
        top = [k for k, t in enumerate(tokens) if t in ASSIGN_OPS and _depth_at(tokens, k) == 0]
        if len(top) > 1:
            self.f.problems.append("chained assignment")
            return
        if top:
            k = top[0]
            lhs, op, rhs = tokens[:k], tokens[k], tokens[k + 1 :]
            self.reads(rhs, cond, stmt)
            self.write_target(lhs, cond, stmt, also_read=(op != "="))
            return
        self.reads(tokens, cond, stmt)

    def decl(self, tokens: list[str], cond: bool) -> None:
        stmt = self.next_stmt()
        k = 0
        while k < len(tokens) and tokens[k] in TYPE_WORDS:
            # struct/enum tags
            k += 2 if tokens[k] in ("struct", "enum") else 1
        for declarator in _split_top(tokens[k:], ","):
            names = [t for t in declarator if re.match(r"[A-Za-z_]", t)]
            if not names:
                continue
            self.f.declared.add(names[0])
            if "=" in declarator:
                eq = declarator.index("=")
                self.reads(declarator[eq + 1 :], cond, stmt)

    def block(self, stmts: list, cond: bool) -> None:
        for s in stmts:
            if isinstance(s, Simple):
                self.simple(s.tokens, cond)
            elif isinstance(s, Decl):
                self.decl(s.tokens, cond)
            elif isinstance(s, For):
                if s.init and s.init[0] in TYPE_WORDS:
                    self.decl(s.init, cond)
                elif s.init:
                    self.simple(s.init, cond)
                self.reads(s.cond, cond, self.next_stmt())
                self.block(s.body, True)
                if s.incr:
                    for part in _split_top(s.incr, ","):
                        self.simple(part, True)
            elif isinstance(s, While):
                self.reads(s.cond, cond, self.next_stmt())
                self.block(s.body, True)
            elif isinstance(s, If):
                self.reads(s.cond, cond, self.next_stmt())
                self.block(s.then, True)
                self.block(s.orelse, True)
            elif isinstance(s, Jump):
                if s.word != "continue":
                    self.f.problems.append(f"early exit via '{s.word}'")


def _depth_at(tokens: list[str], k: int) -> int:
    depth = 0
    for tok in tokens[:k]:
        if tok in "([":
            depth += 1
        elif tok in ")]":
            depth -= 1
    return depth


def _top_ops(tokens: list[str]) -> list[str]:
    ops = []
    depth = 0
    for k, tok in enumerate(tokens):
        if tok in "([":
            depth += 1
        elif tok in ")]":
            depth -= 1
        elif depth == 0 and tok in _PRECEDENCE and k > 0 and tokens[k - 1] not in _PRECEDENCE:
            ops.append(tok)
    return ops


def _binds_tighter(rest: list[str], op: str) -> bool:
    return all(_PRECEDENCE[o] >= _PRECEDENCE[op] for o in _top_ops(rest))


def _reduction_form(tokens: list[str]) -> tuple[str, str] | None:
    """(variable, operator) for ``v op= e``, ``v = v op e``, ``v = e op v`` or ``v++``.

    The mirrored form is only accepted for commutative operators.
    """
    if len(tokens) == 2:
        if tokens[1] in ("++", "--") and _is_name(tokens[0]):
            return tokens[0], tokens[1][0]
        if tokens[0] in ("++", "--") and _is_name(tokens[1]):
            return tokens[1], tokens[0][0]
        return None
    if len(tokens) < 3 or not _is_name(tokens[0]):
        return None
    v, op = tokens[0], tokens[1]
    if op.endswith("=") and op[:-1] in REDUCTION_OPS:
        return (v, op[:-1]) if v not in tokens[2:] else None
    if op != "=" or len(tokens) < 5:
        return None
    rhs = tokens[2:]
    if rhs[0] == v and rhs[1] in REDUCTION_OPS:
        red_op, rest = rhs[1], rhs[2:]
    elif rhs[-1] == v and rhs[-2] in REDUCTION_OPS and rhs[-2] != "-":
        red_op, rest = rhs[-2], rhs[:-2]
    else:
        return None
    if not rest or v in rest or not _binds_tighter(rest, red_op):
        return None
    return v, red_op


# ---------------------------------------------------------------- heuristic


@dataclass(frozen=True)
class LoopSource:
    id: str
    code: str
    language: str = "c"


def _outer_loop(code: str) -> For:
    tokens = c_tokens(code)
    try:
        start = tokens.index("for")
    except ValueError:
        raise UnsupportedLoop("no for-loop header found") from None
    stmt, _ = _parse_statement(tokens, start)
    return stmt


def _induction_variable(init: list[str]) -> str:
    k = 0
    while k < len(init) and init[k] in TYPE_WORDS:
        k += 1
    if k + 1 < len(init) and init[k + 1] == "=" and re.match(r"[A-Za-z_]", init[k]):
        return init[k]
    raise UnsupportedLoop(f"no induction variable in {' '.join(init)!r}")


def _unit_slice(sub: tuple[str, ...], iv: str, varying: set[str]) -> bool:
    """True when the subscript is ``iv`` plus or minus loop-invariant terms."""
    terms: list[tuple[str, list[str]]] = []
    depth = 0
    sign = "+"
    current: list[str] = []
    for k, tok in enumerate(sub):
        if tok in "([":
            depth += 1
        elif tok in ")]":
            depth -= 1
        if depth == 0 and tok in ("+", "-") and current and current[-1] not in _PRECEDENCE:
            terms.append((sign, current))
            sign, current = tok, []
            continue
        current.append(tok)
    terms.append((sign, current))
    with_iv = [(s, t) for s, t in terms if iv in t]
    if len(with_iv) != 1:
        return False
    s, t = with_iv[0]
    if s != "+" or t != [iv]:
        return False
    return not any(tok in varying for _, t in terms for tok in t if tok != iv)


def analyze_loop(code: str) -> PatternDecision:
    """Rule-based decision for the outermost for-loop in ``code``.

    Raises UnsupportedLoop if the loop cannot be split into statements.
    """
    loop = _outer_loop(code)
    iv = _induction_variable(loop.init)
    facts = _LoopFacts(iv)
    _Walker(facts).block(loop.body, False)

    accesses = facts.accesses
    notes: list[str] = list(facts.problems)
    written = {a.name for a in accesses if a.write}
    varying = written | facts.declared

    # 1. reductions
    reductions: dict[str, list[str]] = {}
    by_var: dict[str, set[str]] = {}
    for stmt, (v, op) in facts.reduction_stmts.items():
        by_var.setdefault(v, set()).add(op)
    red_var_op: dict[str, str] = {}
    for v, ops in by_var.items():
        if len(ops) != 1 or v == iv or v in facts.declared:
            continue
        red_stmts = {s for s, (var, _) in facts.reduction_stmts.items() if var == v}
        if any(a.name == v and a.stmt not in red_stmts for a in accesses):
            continue
        if any(a.name == v and a.subscripts is not None for a in accesses):
            continue
        red_var_op[v] = next(iter(ops))
    for stmt_idx in sorted(facts.reduction_stmts):
        v, op = facts.reduction_stmts[stmt_idx]
        if red_var_op.get(v) == op and v not in reductions.get(op, []):
            reductions.setdefault(op, []).append(v)

    # 2. dependences that rule out parallel execution
    if any(a.name == iv and a.write for a in accesses):
        notes.append(f"loop counter {iv} modified in body")
    arrays: dict[str, list[Access]] = {}
    for a in accesses:
        if a.subscripts is not None and a.name not in facts.declared:
            arrays.setdefault(a.name, []).append(a)
    for name, accs in arrays.items():
        if not any(a.write for a in accs):
            continue
        dims = {len(a.subscripts) for a in accs}
        ok = False
        if len(dims) == 1:
            for d in range(dims.pop()):
                subs = {a.subscripts[d] for a in accs}
                if len(subs) == 1 and _unit_slice(next(iter(subs)), iv, varying - {iv}):
                    ok = True
                    break
        if not ok:
            notes.append(f"possible cross-iteration dependence on array {name}")
    definite: set[str] = set()
    carried: list[str] = []
    for a in accesses:
        if a.subscripts is not None or a.name == iv or a.name in red_var_op or a.name in facts.declared:
            continue
        if a.write:
            if "." in a.name or "->" in a.name:
                note = f"write to shared member {a.name}"
                if note not in notes:
                    notes.append(note)
                continue
            if not a.conditional:
                definite.add(a.name)
        elif a.name in written and a.name not in definite and a.name not in carried:
            carried.append(a.name)
    for name in carried:
        notes.append(f"scalar {name} read before it is written")

    if notes:
        return PatternDecision(False, source="heuristic", notes=tuple(notes))

    # 3. privatizable scalars in order of first appearance
    # the counter is listed only when its value is used beyond indexing
    private: list[str] = []
    if any(a.name == iv and not a.in_index for a in accesses):
        private.append(iv)
    for a in accesses:
        if (
            a.write
            and a.subscripts is None
            and a.name not in red_var_op
            and a.name not in facts.declared
            and a.name != iv
            and a.name not in private
        ):
            private.append(a.name)
    return PatternDecision(
        True, tuple(private), {op: tuple(vs) for op, vs in reductions.items()}, "heuristic"
    )


def decide_heuristic(loop: LoopSource, strict: bool = False) -> PatternDecision:
    """Rule-based decision; unparseable loops become non-parallel with a note."""
    try:
        return analyze_loop(loop.code)
    except UnsupportedLoop as exc:
        if strict:
            raise
        logger.warning("loop %s not analyzable, assuming non-parallel: %s", loop.id, exc)
        return PatternDecision(False, source="heuristic", notes=(f"unsupported loop: {exc}",))
