"""Enrich three k-means programs and show they agree once blank boxes are ignored."""

import itertools
from pathlib import Path

from semflow import build_raw_graph, enrich, is_isomorphic, labeled_isomorphic, load_ontology
from semflow.trace import load_trace

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"
ontology = load_ontology([FIXTURES / "ontology"])

semantic = {}
for name in ("kmeans_scipy", "kmeans_sklearn", "kmeans_r"):
    raw = build_raw_graph(load_trace(FIXTURES / "traces" / f"{name}.jsonl"))
    d, report = enrich(raw, ontology)
    semantic[name] = d
    labels = sorted(b.label or "(blank)" for b in d.boxes.values())
    print(f"{name}: {len(raw.boxes)} raw boxes -> {labels}")
    for note in report.notes:
        print(f"    blank box {note['box']} stands for {', '.join(note['subsumes'])}")

for a, b in itertools.combinations(semantic, 2):
    print(f"{a} vs {b}: full={is_isomorphic(semantic[a], semantic[b])}"
          f" labeled={labeled_isomorphic(semantic[a], semantic[b])}")
