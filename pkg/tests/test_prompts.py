import pytest

from ompguide.errors import NotParallel
from ompguide.oracle import PatternDecision
from ompguide.prompts import (
    CODELLAMA_CHAT,
    GENERIC,
    TemplateSet,
    render_basic,
    render_clause_text,
    render_guided,
    substitute,
)

from conftest import GOLDEN

PRIVATE_I = PatternDecision(True, ("i",))
RED = PatternDecision(True, reductions={"*": ("R23", "T23")})


def test_guided_generic_golden():
    code = (GOLDEN / "heartwall_loop.c").read_text()
    expected = (GOLDEN / "guided_generic_heartwall_private.txt").read_text()
    spec = render_guided(code, PRIVATE_I)
    assert spec.rendered == expected
    assert spec.clause_text == "private(i)"
    assert "Add private(i) to the loop." in spec.rendered


def test_guided_codellama_golden():
    code = (GOLDEN / "is_loop.c").read_text()
    expected = (GOLDEN / "guided_codellama_is_reduction.txt").read_text()
    spec = render_guided(code, RED, CODELLAMA_CHAT)
    assert spec.rendered == expected
    assert spec.rendered.startswith("<s>[INST] <<SYS>>")
    assert spec.rendered.endswith("[/INST]")


def test_basic_prompt_keeps_original_spelling():
    spec = render_basic("x = 1;")
    assert "If the code is not parallalizable, output the original given code." in spec.rendered
    assert spec.rendered.endswith("\n Code: x = 1;\n Output code: ")
    fixed = render_basic("x = 1;", templates=TemplateSet(fix_typos=True))
    assert "parallelizable" in fixed.rendered


def test_clause_text():
    assert render_clause_text(PRIVATE_I) == "private(i)"
    assert render_clause_text(RED) == "reduction(*:R23,T23)"
    both = PatternDecision(True, ("t",), {"+": ("s",), "*": ("p",)})
    assert render_clause_text(both) == "private(t) reduction(+:s) reduction(*:p)"
    assert render_clause_text(both, "name-only") == "reduction and private"
    assert render_clause_text(PatternDecision(True)) == ""
    with pytest.raises(NotParallel):
        render_clause_text(PatternDecision(False))
    with pytest.raises(ValueError):
        render_clause_text(PRIVATE_I, "terse")


def test_do_all_drops_clause_sentence():
    spec = render_guided("a[i] = 0;", PatternDecision(True))
    assert "Add" not in spec.rendered
    assert "{clause}" not in spec.rendered


def test_guided_refuses_non_parallel():
    with pytest.raises(NotParallel):
        render_guided("x;", PatternDecision(False))


def test_single_pass_substitution():
    code = 'printf("{clause} {code}");'
    spec = render_guided(code, PRIVATE_I)
    assert spec.rendered.count(code) == 1
    assert substitute("{code}|{other}", code="{code}") == "{code}|{other}"


def test_code_appears_once_over_corpus(corpus):
    for s in corpus:
        assert render_basic(s.sequential_code).rendered.count(s.sequential_code) == 1
        if s.gold.parallel:
            for family in (GENERIC, CODELLAMA_CHAT):
                assert render_guided(s.sequential_code, s.gold, family).rendered.count(s.sequential_code) == 1


def test_templates_from_files(tmp_path):
    path = tmp_path / "guided.txt"
    path.write_text("Parallelize with {clause}: {code}")
    ts = TemplateSet.from_files(guided=path)
    assert render_guided("x;", PRIVATE_I, templates=ts).rendered == "Parallelize with private(i): x;"
    with pytest.raises(ValueError):
        TemplateSet.from_files(nonsense=path)
    with pytest.raises(ValueError):
        render_basic("x;", "gpt-chat")
