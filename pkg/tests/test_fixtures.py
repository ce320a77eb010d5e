"""The bundled data files agree with each other and with the current templates."""
import csv
import importlib.util
import json
from pathlib import Path

from ompguide import data_path
from ompguide.oracle import AnnotationStore

ROOT = Path(__file__).resolve().parents[1]


def load_builder():
    spec = importlib.util.spec_from_file_location("build_replay_fixtures", ROOT / "scripts" / "build_replay_fixtures.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_replay_store_is_current():
    builder = load_builder()
    want = {name: builder.render_entry(e) for name, e in builder.expected_entries().items()}
    have = {p.name: p.read_text() for p in data_path("replay").glob("*.json")}
    assert have == want, "run scripts/build_replay_fixtures.py"


def test_annotations_match_corpus_gold(corpus):
    store = AnnotationStore.load(data_path("annotations.jsonl"))
    assert store == {s.id: s.gold for s in corpus}


def test_responses_cover_corpus(corpus):
    responses = json.loads(data_path("responses.json").read_text())
    assert set(responses) == {s.id for s in corpus}
    for s in corpus:
        assert (responses[s.id]["guided"] is None) == (not s.gold.parallel)


def test_runtime_tables_shape():
    for name, apps in (("runtimes_npb.csv", 7), ("runtimes_rodinia.csv", 4)):
        with open(data_path(name)) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4 * apps
        assert {r["model"] for r in rows} == {"GPT-3.5", "GPT-4", "CodeLlama-34B", "CodeGen-16B"}
