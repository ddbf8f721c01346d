"""Regenerate the golden canonical forms under tests/fixtures/expected.

Each golden is written only after the canonical form agrees with a
brute-force permutation check against the hand-encoded figure.
"""

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path[:0] = [str(ROOT / "tests"), str(ROOT / "src")]

import figures  # noqa: E402
from oracles import brute_isomorphic  # noqa: E402
from semflow.annotations import load_ontology  # noqa: E402
from semflow.canonical import canonical_form  # noqa: E402
from semflow.enrich import enrich  # noqa: E402
from semflow.trace import build_raw_graph, load_trace  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures"
OUT = FIXTURES / "expected"


def raw(name):
    return build_raw_graph(load_trace(FIXTURES / "traces" / f"{name}.jsonl"))


def main():
    ontology = load_ontology([FIXTURES / "ontology"])
    cases = {
        "kmeans_scipy.raw": (raw("kmeans_scipy"), figures.scipy_raw()),
        "kmeans_sklearn.raw": (raw("kmeans_sklearn"), figures.sklearn_raw()),
        "kmeans_r.raw": (raw("kmeans_r"), figures.r_raw()),
        "regression.semantic": (enrich(raw("regression"), ontology)[0], figures.regression_semantic()),
    }
    OUT.mkdir(exist_ok=True)
    for name, (built, figure) in cases.items():
        if not brute_isomorphic(built, figure):
            sys.exit(f"{name}: built diagram does not match the figure")
        form = canonical_form(built)
        if form != canonical_form(figure):
            sys.exit(f"{name}: canonical forms disagree")
        (OUT / f"{name}.canonical").write_bytes(form)
        print(f"wrote {name}.canonical ({len(built.boxes)} boxes)")


if __name__ == "__main__":
    main()
