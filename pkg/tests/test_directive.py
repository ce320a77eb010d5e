import pytest
from hypothesis import given, strategies as st

from ompguide.clauses import DEFAULT_REGISTRY, Sensitivity, SensitivityRegistry
from ompguide.directive import (
    MalformedLine,
    extract_directives,
    first_directive,
    parse_directive,
    render_directive,
    strip_fences,
)
from ompguide.errors import MalformedDirective


def test_private_clause():
    d = parse_directive("#pragma omp parallel for private(i)")
    assert d.kind == "parallel for"
    assert len(d.clauses) == 1
    c = d.clauses[0]
    assert (c.keyword, c.items, c.modifier) == ("private", ("i",), None)
    assert c.sensitivity is Sensitivity.ORDER_INSENSITIVE


def test_space_before_paren():
    d = parse_directive("#pragma omp parallel for private (i)")
    assert d.clauses[0].items == ("i",)


def test_stray_comma_after_modifier_is_kept():
    d = parse_directive("#pragma omp parallel for reduction(*:, R23, T23)")
    c = d.clauses[0]
    assert c.modifier == "*"
    assert c.items == ("", "R23", "T23")
    assert c.render() == "reduction(*:,R23,T23)"


def test_bare_and_parenthesized_clauses():
    d = parse_directive("#pragma omp parallel for simd schedule(static, 4) nowait collapse(2)")
    assert d.kind == "parallel for simd"
    assert [c.keyword for c in d.clauses] == ["schedule", "nowait", "collapse"]
    assert d.clauses[0].items == ("static", "4")
    assert not d.clauses[1].parenthesized


def test_nested_parens_and_array_sections():
    d = parse_directive("#pragma omp target map(to: a[0:n], b[f(1, 2)]) if(n > (m + 1))")
    m = d.clauses[0]
    assert m.modifier == "to"
    assert m.items == ("a[0:n]", "b[f(1, 2)]")
    assert d.clauses[1].items == ("n > (m + 1)",)


def test_commas_between_clauses_and_case():
    d = parse_directive("#PRAGMA OMP Parallel For PRIVATE(x), shared(y)")
    assert d.kind == "parallel for"
    assert [c.keyword for c in d.clauses] == ["private", "shared"]


def test_critical_name_is_a_clause_span():
    d = parse_directive("#pragma omp critical(update)")
    assert d.kind == "critical"
    assert d.clauses[0].keyword == "critical"


@pytest.mark.parametrize(
    "text",
    [
        "int x = 0;",
        "#pragma omp parallel for private(i",
        "#pragma omp parallel for private(i))",
        "#pragma omp parallel for private(i) ;",
        "#pragma omp",
    ],
)
def test_malformed(text):
    with pytest.raises(MalformedDirective):
        parse_directive(text)


def test_render_canonical():
    d = parse_directive("#pragma   omp parallel   for reduction( + : sum )  private( a ,b )")
    assert render_directive(d) == "#pragma omp parallel for reduction(+:sum) private(a,b)"


def test_extract_keeps_line_numbers_and_malformed_lines():
    code = "```c\nint a;\n#pragma omp parallel for \\\n   private(i)\nfor(;;){}\n#pragma omp for private(\n```"
    found = extract_directives(code)
    assert [idx for _, idx in found] == [2, 5]
    assert found[0][0].clauses[0].items == ("i",)
    assert isinstance(found[1][0], MalformedLine)


def test_first_directive_none():
    assert first_directive("for (i = 0; i < n; i++) a[i] = 0;") is None


def test_strip_fences_preserves_line_count():
    code = "```cpp\nx\n```"
    assert strip_fences(code).split("\n") == ["", "x", ""]


def test_registry_override_and_unknown_default():
    reg = DEFAULT_REGISTRY.with_overrides({"aligned": "order_insensitive"})
    assert reg.is_order_insensitive("aligned")
    assert reg.lookup("madeup") is Sensitivity.ORDER_SENSITIVE
    assert not DEFAULT_REGISTRY.is_order_insensitive("aligned")
    assert SensitivityRegistry({}).lookup("private") is Sensitivity.ORDER_SENSITIVE


def test_round_trip_over_corpus(corpus):
    for s in corpus:
        for found, _ in extract_directives(s.reference_parallel_code):
            again = parse_directive(render_directive(found))
            assert again == found


names = st.from_regex(r"[a-z][a-z0-9_]{0,4}", fullmatch=True)
clause = st.one_of(
    st.builds(lambda vs: f"private({','.join(vs)})", st.lists(names, min_size=1, max_size=4)),
    st.builds(lambda op, vs: f"reduction({op}:{','.join(vs)})", st.sampled_from("+*-&|^"), st.lists(names, min_size=1, max_size=3)),
    st.builds(lambda n: f"collapse({n})", st.integers(1, 4)),
    st.just("nowait"),
)


@given(st.sampled_from(["parallel for", "for", "parallel for simd", "simd"]), st.lists(clause, max_size=4))
def test_round_trip_property(kind, clauses):
    d = parse_directive(" ".join(["#pragma omp", kind, *clauses]))
    assert parse_directive(render_directive(d)) == d
