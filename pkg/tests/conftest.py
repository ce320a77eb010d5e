from pathlib import Path

import pytest

from ompguide import data_path, load_corpus

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def corpus():
    return load_corpus(data_path("corpus.jsonl"))


@pytest.fixture(scope="session")
def samples(corpus):
    return {s.id: s for s in corpus}


# ---------------------------------------------------------------- acceptance summary

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    item_marker = getattr(report, "criterion", None)
    if item_marker is None:
        return
    number, title = item_marker
    failed = report.failed
    if report.when == "call" or failed:
        previous = _criteria.get(number, (title, "PASS"))[1]
        _criteria[number] = (title, "FAIL" if failed or previous == "FAIL" else "PASS")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number} [{status}] {title}")
