"""Text-similarity metrics, rank correlation, accuracy and speedup arithmetic.

All similarity scores are on a 0-100 scale.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import DegenerateInput

_TOKEN_RE = re.compile(r"&&|\|\||\+=|\*=|[(),:+\-*&|^<>=]|[^(),:+\-*&|^<>=]+")

BLEU_EPSILON = 1e-9
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5
# longer candidates skip the exact chunk search (recursion depth grows with length)
MAX_EXACT_SEARCH_LEN = 400


def tokenize(text: str) -> list[str]:
    """Whitespace split, then split off punctuation and operators.

    >>> tokenize("reduction(+:z)")
    ['reduction', '(', '+', ':', 'z', ')']
    """
    tokens: list[str] = []
    for piece in text.split():
        tokens.extend(_TOKEN_RE.findall(piece))
    return tokens


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> float:
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 100.0 * 2 * p * r / (p + r)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: Sequence[str], references: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Sentence BLEU with clipped n-gram precision and epsilon smoothing."""
    c = len(candidate)
    if c == 0 or not references:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngrams(candidate, n)
        total = sum(cand_counts.values())
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngrams(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        p = clipped / total if total else 0.0
        log_sum += math.log(p if p > 0 else BLEU_EPSILON) / max_n
    # closest reference length, ties resolved towards the shorter one
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    bp = 1.0 if c >= r else math.exp(1 - r / c)
    return min(100.0, 100.0 * bp * math.exp(log_sum))


# ---------------------------------------------------------------- METEOR


def _chunks(pairs: Sequence[tuple[int, int]]) -> int:
    """Chunks in an alignment given as (candidate_pos, reference_pos) sorted by candidate_pos."""
    if not pairs:
        return 0
    chunks = 1
    for (ci, ri), (cj, rj) in zip(pairs, pairs[1:]):
        if not (cj == ci + 1 and rj == ri + 1):
            chunks += 1
    return chunks


def _greedy_alignment(candidate: Sequence[str], reference: Sequence[str]) -> list[tuple[int, int]]:
    """Repeatedly align the longest common run of still-unaligned tokens."""
    free_c = [True] * len(candidate)
    free_r = [True] * len(reference)
    pairs: list[tuple[int, int]] = []
    while True:
        best = (0, 0, 0)
        prev = [0] * (len(reference) + 1)
        for i in range(len(candidate)):
            cur = [0] * (len(reference) + 1)
            if free_c[i]:
                for j in range(len(reference)):
                    if free_r[j] and candidate[i] == reference[j]:
                        cur[j + 1] = prev[j] + 1
                        if cur[j + 1] > best[0]:
                            best = (cur[j + 1], i, j)
            prev = cur
        length, i, j = best
        if length == 0:
            break
        for k in range(length):
            free_c[i - k] = free_r[j - k] = False
            pairs.append((i - k, j - k))
    pairs.sort()
    return pairs


def meteor_alignment(
    candidate: Sequence[str], reference: Sequence[str], budget: int = 200_000
) -> tuple[int, int]:
    """Return (matches, chunks) of an exact-match alignment.

    Matches are maximal by construction; chunks are minimised by
    branch-and-bound seeded with a greedy solution. ``budget`` caps the
    number of search nodes, after which the best alignment found is used.
    """
    need = Counter(candidate) & Counter(reference)
    m = sum(need.values())
    if m == 0:
        return 0, 0
    greedy = _greedy_alignment(candidate, reference)
    best = _chunks(greedy)
    if best == 1 or len(candidate) > MAX_EXACT_SEARCH_LEN:
        return m, best
    positions: dict[str, list[int]] = {}
    for j, tok in enumerate(reference):
        positions.setdefault(tok, []).append(j)
    remaining_c = Counter(candidate)
    used = [False] * len(reference)
    left = dict(need)
    nodes = 0

    # state: position i in candidate, last aligned pair, chunks so far, matches so far
    def search(i: int, last: tuple[int, int] | None, chunks: int, matched: int) -> None:
        nonlocal best, nodes
        nodes += 1
        if nodes > budget or chunks >= best:
            return
        if matched == m:
            best = chunks
            return
        if i == len(candidate):
            return
        tok = candidate[i]
        remaining_c[tok] -= 1
        if left.get(tok, 0) > 0:
            options = [j for j in positions[tok] if not used[j]]
            # extending the current chunk first finds good bounds early
            if last is not None and last[0] == i - 1:
                options.sort(key=lambda j: j != last[1] + 1)
            for j in options:
                extends = last is not None and last == (i - 1, j - 1)
                used[j] = True
                left[tok] -= 1
                search(i + 1, (i, j), chunks + (0 if extends else 1), matched + 1)
                left[tok] += 1
                used[j] = False
        # leave token i unaligned only if enough copies remain to reach m
        if left.get(tok, 0) <= remaining_c[tok]:
            search(i + 1, last, chunks, matched)
        remaining_c[tok] += 1

    search(0, None, 0, 0)
    return m, best


def meteor(candidate: Sequence[str], reference: Sequence[str]) -> float:
    m, chunks = meteor_alignment(candidate, reference)
    if m == 0:
        return 0.0
    p = m / len(candidate)
    r = m / len(reference)
    fmean = p * r / (METEOR_ALPHA * p + (1 - METEOR_ALPHA) * r)
    penalty = METEOR_GAMMA * (chunks / m) ** METEOR_BETA
    return 100.0 * fmean * (1 - penalty)


# ---------------------------------------------------------------- correlation


def average_ranks(values: Sequence[float]) -> list[Fraction]:
    order = sorted(range(len(values)), key=lambda k: values[k])
    ranks: list[Fraction] = [Fraction(0)] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = Fraction(i + j + 2, 2)
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho with average ranks for ties.

    Raises DegenerateInput when either input is constant.
    """
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise DegenerateInput("spearman needs at least two observations")
    if len(set(xs)) == 1 or len(set(ys)) == 1:
        raise DegenerateInput("constant input, rank correlation undefined")
    rx, ry = average_ranks(xs), average_ranks(ys)
    n = len(xs)
    mean = Fraction(n + 1, 2)
    cov = sum((a - mean) * (b - mean) for a, b in zip(rx, ry))
    vx = sum((a - mean) ** 2 for a in rx)
    vy = sum((b - mean) ** 2 for b in ry)
    if vx == vy:
        return float(cov / vx)
    return float(cov) / math.sqrt(float(vx) * float(vy))


# ---------------------------------------------------------------- classification


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_labels(cls, gold: Sequence[bool], predicted: Sequence[bool]) -> "ConfusionCounts":
        if len(gold) != len(predicted):
            raise ValueError("gold and predicted label lists differ in length")
        tp = sum(g and p for g, p in zip(gold, predicted))
        tn = sum(not g and not p for g, p in zip(gold, predicted))
        fp = sum(not g and p for g, p in zip(gold, predicted))
        fn = sum(g and not p for g, p in zip(gold, predicted))
        return cls(tp, tn, fp, fn)


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise DegenerateInput("accuracy of an empty confusion matrix")
    return round(100.0 * (c.tp + c.tn) / c.total, 2)


# ---------------------------------------------------------------- speedup


@dataclass(frozen=True)
class RuntimePair:
    app: str
    time_basic: float
    time_guided: float

    def __post_init__(self):
        if not (self.time_basic > 0 and self.time_guided > 0):
            raise ValueError(f"{self.app}: runtimes must be positive")

    @property
    def speedup(self) -> float:
        return (self.time_basic / self.time_guided - 1.0) * 100.0


def speedup_percent(pairs: Sequence[RuntimePair]) -> tuple[list[tuple[str, float]], float]:
    """Per-app speedup of guided over basic code, and their arithmetic mean."""
    if not pairs:
        raise DegenerateInput("no runtime pairs")
    per_app = [(p.app, p.speedup) for p in pairs]
    return per_app, sum(s for _, s in per_app) / len(per_app)
