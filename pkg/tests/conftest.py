import json
from importlib import resources

import pytest

from motifwalk.fragment import annotation_from_record, load_annotations
from motifwalk.pipeline import build_from_annotations

ACCEPTANCE = {}


def data_path(name):
    return str(resources.files("motifwalk") / "data" / name)


@pytest.fixture(scope="session")
def toy():
    """(graph, corpus) built from the bundled 4-molecule toy set."""
    return build_from_annotations(load_annotations(data_path("toy_annotations.json")))


@pytest.fixture(scope="session")
def table():
    return build_from_annotations(load_annotations(data_path("table_annotations.json")))


@pytest.fixture(scope="session")
def synthetic():
    """(graph, corpus) over the 30 bundled synthetic molecules."""
    with open(data_path("synthetic_annotations.json")) as fh:
        recs = json.load(fh)
    return build_from_annotations([annotation_from_record(r) for r in recs])


@pytest.fixture
def record():
    def _record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
