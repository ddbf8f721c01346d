import itertools
import json

import pytest

from conftest import EXPECTED, NEGATIVE, ONTOLOGY_DIR, TRACES
from semflow.canonical import canonical_form
from semflow.cli import ENV_ONTOLOGY_PATH, main
from semflow.diagram import empty
from semflow.serialize import diagram_from_json, load_diagram

KMEANS = ("kmeans_scipy", "kmeans_sklearn", "kmeans_r")
ONT = ["--ontology", str(ONTOLOGY_DIR)]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- validate --------------------------------------------------------------------------


def test_validate_exit_codes(capsys, tmp_path):
    assert run(capsys, "validate", *ONT)[0] == 0
    code, out, _ = run(capsys, "validate", *ONT, "--ontology", NEGATIVE / "ill_typed_definition.json")
    assert code == 1 and "ill-typed-definition" in out
    code, _, err = run(capsys, "validate", "--ontology", tmp_path / "missing.json")
    assert code == 2 and "missing.json" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "validate", "--ontology", bad)[0] == 2


def test_validate_strict_turns_functoriality_into_failure(capsys):
    path = NEGATIVE / "slot_count_mismatch.json"
    assert run(capsys, "validate", *ONT, path)[0] == 1
    assert run(capsys, "validate", "--strict", *ONT, "--ontology", path)[0] == 1


def test_validate_writes_summary(capsys, tmp_path):
    out = tmp_path / "summary.json"
    assert run(capsys, "validate", *ONT, NEGATIVE / "cyclic_supertypes.json", "--out", out)[0] == 0
    summary = json.loads(out.read_text())
    assert summary["diagnostics"][0]["code"] == "subtype-cycle"


def test_ontology_from_environment(capsys, monkeypatch):
    monkeypatch.setenv(ENV_ONTOLOGY_PATH, str(ONTOLOGY_DIR))
    assert run(capsys, "validate")[0] == 0
    monkeypatch.delenv(ENV_ONTOLOGY_PATH)
    assert run(capsys, "validate")[0] == 2


# -- raw -------------------------------------------------------------------------------


@pytest.mark.parametrize("name", KMEANS)
def test_raw_matches_golden(capsys, name):
    code, out, _ = run(capsys, "raw", TRACES / f"{name}.jsonl")
    assert code == 0
    assert canonical_form(diagram_from_json(out)) == (EXPECTED / f"{name}.raw.canonical").read_bytes()


def test_raw_edge_cases(capsys, tmp_path):
    blank = tmp_path / "empty.jsonl"
    blank.write_text("")
    code, out, _ = run(capsys, "raw", blank)
    assert code == 0 and diagram_from_json(out) == empty()
    assert run(capsys, "raw", NEGATIVE / "nesting_violation.jsonl")[0] == 2
    assert run(capsys, "raw", NEGATIVE / "malformed_kind.jsonl")[0] == 2
    assert run(capsys, "raw", tmp_path / "absent.jsonl")[0] == 2


def test_raw_dot_and_out_file(capsys, tmp_path):
    code, out, _ = run(capsys, "raw", "--format", "dot", TRACES / "kmeans_scipy.jsonl")
    assert code == 0 and out.startswith("digraph") and "kmeans2" in out
    target = tmp_path / "raw.json"
    assert run(capsys, "raw", TRACES / "kmeans_scipy.jsonl", "--out", target)[0] == 0
    assert load_diagram(target).atomic_count() == 3


# -- enrich and iso --------------------------------------------------------------------


def _enrich_to(capsys, tmp_path, name, *extra):
    target = tmp_path / f"{name}.json"
    code, _, err = run(capsys, "enrich", *ONT, *extra, TRACES / f"{name}.jsonl", "--out", target)
    return code, target, err


def test_kmeans_outputs_agree_modulo_blanks(capsys, tmp_path):
    paths = []
    for name in KMEANS:
        code, path, err = _enrich_to(capsys, tmp_path, name)
        assert code == 0
        assert json.loads(err)["expanded_boxes"] > 0
        paths.append(path)
    for a, b in itertools.combinations(paths, 2):
        assert run(capsys, "iso", "--labeled-only", a, b)[0] == 0


def test_regression_matches_golden(capsys, tmp_path):
    code, path, _ = _enrich_to(capsys, tmp_path, "regression")
    assert code == 0
    assert canonical_form(load_diagram(path)) == (EXPECTED / "regression.semantic.canonical").read_bytes()


def test_enrich_accepts_a_raw_diagram(capsys, tmp_path):
    raw = tmp_path / "raw.json"
    run(capsys, "raw", TRACES / "kmeans_r.jsonl", "--out", raw)
    _, from_raw, _ = run(capsys, "enrich", *ONT, raw)
    _, from_trace, _ = run(capsys, "enrich", *ONT, TRACES / "kmeans_r.jsonl")
    assert from_raw == from_trace


def test_strict_and_lenient_slot_mismatch(capsys, tmp_path):
    extra = ("--ontology", NEGATIVE / "slot_mismatch.json")
    code, _, err = _enrich_to(capsys, tmp_path, "kmeans_sklearn", "--strict", *extra)
    assert code == 1 and "slot" in err.lower()
    code, _, err = _enrich_to(capsys, tmp_path, "kmeans_sklearn", *extra)
    assert code == 0
    report = json.loads(err)
    assert report["skipped"] == ["b1"]


def test_enrich_io_errors(capsys, tmp_path):
    assert run(capsys, "enrich", *ONT, NEGATIVE / "nesting_violation.jsonl")[0] == 2
    assert run(capsys, "enrich", *ONT, tmp_path / "nope.jsonl")[0] == 2


def test_iso_exit_codes(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "raw", TRACES / "kmeans_scipy.jsonl", "--out", a)
    run(capsys, "raw", TRACES / "kmeans_sklearn.jsonl", "--out", b)
    assert run(capsys, "iso", a, a)[0] == 0
    code, out, _ = run(capsys, "iso", a, b)
    assert code == 1 and out.strip() == "not isomorphic"
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2")
    assert run(capsys, "iso", a, bad)[0] == 2
    assert run(capsys, "iso", a, TRACES / "kmeans_scipy.jsonl")[0] == 2


@pytest.mark.parametrize("argv", [("raw",), ("enrich", *ONT), ("raw", "--format", "dot")])
def test_outputs_are_deterministic(capsys, argv):
    first = run(capsys, *argv, TRACES / "nested_kmeans.jsonl")
    second = run(capsys, *argv, TRACES / "nested_kmeans.jsonl")
    assert first == second and first[0] == 0
