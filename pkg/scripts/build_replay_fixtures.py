"""Regenerate the bundled replay store from data/responses.json.

Each response is keyed by the exact prompt the pipeline renders, so the
store has to be rebuilt whenever a template or corpus sample changes.
``tests/test_fixtures.py`` fails when the checked-in store is stale.

    python scripts/build_replay_fixtures.py [--check]
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ompguide.harness import gold_annotations, load_corpus
from ompguide.llm import prompt_hash
from ompguide.prompts import CODELLAMA_CHAT, GENERIC, render_basic, render_guided

DATA = Path(__file__).resolve().parents[1] / "src" / "ompguide" / "data"
MODELS = {"gpt-4": GENERIC, "codellama-34b-instruct": CODELLAMA_CHAT}
TIMESTAMP = "2024-01-01T00:00:00+00:00"


def expected_entries(data_dir: Path = DATA) -> dict[str, dict]:
    corpus = load_corpus(data_dir / "corpus.jsonl")
    responses = json.loads((data_dir / "responses.json").read_text())
    gold = gold_annotations(corpus)
    entries = {}
    for model, family in MODELS.items():
        for sample in corpus:
            canned = responses[sample.id]
            prompts = {"basic": render_basic(sample.sequential_code, family).rendered}
            if gold[sample.id].parallel:
                prompts["guided"] = render_guided(sample.sequential_code, gold[sample.id], family).rendered
            for mode, prompt in prompts.items():
                entries[f"{prompt_hash(model, prompt)}.json"] = {
                    "model": model,
                    "prompt": prompt,
                    "response": canned[mode],
                    "timestamp": TIMESTAMP,
                }
    return entries


def render_entry(entry: dict) -> str:
    return json.dumps(entry, indent=2, ensure_ascii=False) + "\n"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="exit 1 if the store is out of date")
    args = ap.parse_args(argv)
    replay = DATA / "replay"
    want = {name: render_entry(e) for name, e in expected_entries().items()}
    have = {p.name: p.read_text() for p in replay.glob("*.json")} if replay.exists() else {}
    if args.check:
        stale = sorted(set(want.items()) ^ set(have.items()))
        for name, _ in stale:
            print(f"stale: {name}", file=sys.stderr)
        return 1 if stale else 0
    replay.mkdir(exist_ok=True)
    for name in set(have) - set(want):
        (replay / name).unlink()
    for name, text in want.items():
        (replay / name).write_text(text)
    print(f"wrote {len(want)} replay entries to {replay}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
