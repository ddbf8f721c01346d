"""Build the raw flow graph of the SciPy k-means trace and print it as DOT."""

from pathlib import Path

from semflow import build_raw_graph, diagram_to_dot
from semflow.trace import call_counts, load_trace

TRACE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "traces" / "kmeans_scipy.jsonl"

events = load_trace(TRACE)
raw = build_raw_graph(events)
print(f"{call_counts(events)['calls']} calls, {len(raw.boxes)} boxes, {len(raw.wires)} wires")
for box_id in raw.topological_order():
    box = raw.boxes[box_id]
    print(f"  {box_id}: {box.label}  {list(box.inputs)} -> {list(box.outputs)}")
print(diagram_to_dot(raw))
