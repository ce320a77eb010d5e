from functools import lru_cache

import pytest

from ompguide.clauses import DEFAULT_REGISTRY
from ompguide.errors import DegenerateInput
from ompguide.metrics import tokenize
from ompguide.ompscore import (
    ClauseSpan,
    categorize,
    mask_clauses,
    normalize_directive_text,
    omp_score,
    omp_score_batch,
    update_clause,
)

from test_metrics import brute_lcs

CAND = "#pragma omp parallel for private(k,j,i) reduction(z:+)"
REF = "#pragma omp parallel for private(i,j,k) reduction(+:z)"


def test_mask_spans():
    spans = mask_clauses(CAND)
    assert [s.text for s in spans] == ["private(k,j,i)", "reduction(z:+)"]
    for s in spans:
        assert CAND[s.start : s.end] == s.text
    assert mask_clauses("#pragma omp parallel for") == []
    assert len(mask_clauses("#pragma omp parallel for private(a) private(b)")) == 2


def test_categorize():
    assert categorize(ClauseSpan(0, 14, "private(k,j,i)")) == "private"
    assert categorize("REDUCTION(+:z)") == "reduction"
    assert categorize("foo(x)") == "foo"


def test_update_clause():
    assert update_clause("private(k,j,i)") == "private(i,j,k)"
    assert update_clause("reduction(z:+)") == "reduction(z:+)"
    assert update_clause("private(x)") == "private(x)"
    assert update_clause("reduction(+: b, a)") == "reduction(+:b,a)"
    # byte order puts upper case first
    assert update_clause("shared(b,B,a)") == "shared(B,a,b)"
    assert update_clause("foo(c,b)") == "foo(c,b)"


def test_registry_override_changes_sorting():
    reg = DEFAULT_REGISTRY.with_overrides({"private": "order_sensitive"})
    assert update_clause("private(k,j,i)", reg) == "private(k,j,i)"


def test_normalize_leaves_outside_text():
    assert normalize_directive_text("#pragma  omp parallel for  private( b , a )") == "#pragma omp parallel for private(a,b)"


def recursive_lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def test_recursive_oracle_agrees_with_enumeration():
    assert recursive_lcs(tuple("abcab"), tuple("bacba")) == brute_lcs("abcab", "bacba")


def test_swapped_reduction_pair_against_lcs_oracle():
    c = tuple(tokenize(normalize_directive_text(CAND)))
    r = tuple(tokenize(normalize_directive_text(REF)))
    lcs = recursive_lcs(c, r)
    p, rec = lcs / len(c), lcs / len(r)
    assert omp_score(CAND, REF) == pytest.approx(100 * 2 * p * rec / (p + rec))
    assert omp_score(CAND, REF) == pytest.approx(100 * 16 / 18)


def test_identity_and_permutation():
    assert omp_score(REF, REF) == 100.0
    assert omp_score("#pragma omp parallel for private(j,i,k)", "#pragma omp parallel for private(i,j,k)") == 100.0


def test_directive_presence_rules():
    seq = "for (i = 0; i < n; i++) a[i] = 0;"
    assert omp_score(seq, seq) == 100.0
    assert omp_score(seq, "#pragma omp parallel for\n" + seq) == 0.0
    assert omp_score("#pragma omp parallel for\n" + seq, seq) == 0.0


def test_malformed_candidate_scored_as_raw_tokens():
    score = omp_score("#pragma omp parallel for private(i", "#pragma omp parallel for private(i)")
    assert 0.0 < score < 100.0


def test_batch():
    assert omp_score_batch([(REF, REF), (REF, REF)])[1] == 100.0
    scores, mean = omp_score_batch([(REF, REF), ("int x;", REF)])
    assert scores == [100.0, 0.0]
    assert mean == 50.0
    with pytest.raises(DegenerateInput):
        omp_score_batch([])


def test_batch_over_corpus_references(corpus):
    pairs = [(s.reference_parallel_code, s.reference_parallel_code) for s in corpus]
    assert omp_score_batch(pairs)[1] == 100.0
