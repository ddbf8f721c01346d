import itertools
import json
import random

import pytest

import figures
from conftest import NEGATIVE, ONTOLOGY_DIR, TRACES
from oracles import random_diagram
from semflow.annotations import load_ontology, loads_ontology
from semflow.canonical import is_isomorphic
from semflow.diagram import (
    BOX_IN,
    BOX_OUT,
    Box,
    Wire,
    WiringDiagram,
    box_in,
    box_out,
    compose,
    empty,
    outer_in,
    outer_out,
    product,
    single_box,
)
from semflow.enrich import contract, enrich, expand, labeled_form, labeled_isomorphic
from semflow.errors import SlotMismatch, TypeConflict
from semflow.trace import build_raw_graph, load_trace

KMEANS = ("kmeans_scipy", "kmeans_sklearn", "kmeans_r")


def raw(name):
    return build_raw_graph(load_trace(TRACES / f"{name}.jsonl"))


# -- fixtures from the k-means and regression programs ----------------------------------


def test_r_kmeans_box_expands_to_two_boxes(ontology):
    d = single_box(("r:numeric", "r:data.frame"), ("r:kmeans",), "r:stats:kmeans",
                   input_slots=("centers", "x"), output_slots=("return",))
    out = expand(d, ontology)
    assert sorted(b.label for b in out.boxes.values()) == ["fit", "k-means"]
    assert out.inputs == (None, None)


def test_all_unannotated_keeps_shape(ontology):
    d = compose(single_box(("x:T",), ("x:T",), "x:pkg:f"), single_box(("x:T",), ("x:T",), "x:pkg:g"))
    out = expand(d, ontology)
    assert {b.label for b in out.boxes.values()} == {None}
    assert out.inputs == (None,) and out.outputs == (None,)
    assert len(out.wires) == len(d.wires)


@pytest.mark.parametrize("name", KMEANS)
def test_kmeans_programs_match_semantic_figure(ontology, name):
    d, report = enrich(raw(name), ontology)
    assert labeled_isomorphic(d, figures.kmeans_semantic())
    labels = sorted(b.label for b in d.boxes.values() if b.label)
    assert labels == sorted(
        ["tabular-file", "read-tabular-file", "k-means", "fit", "k-means-centroids", "clustering-model-clusters"]
    )


def test_kmeans_programs_agree_pairwise(ontology):
    forms = {name: labeled_form(enrich(raw(name), ontology)[0]) for name in KMEANS + ("nested_kmeans",)}
    assert len(set(forms.values())) == 1


def test_sklearn_drop_and_values_collapse(ontology):
    d, report = enrich(raw("kmeans_sklearn"), ontology)
    (blank,) = [b for b in d.boxes.values() if b.label is None]
    assert blank.note == ("NDFrame.drop", "DataFrame.values")
    assert report.contracted_groups == 1
    fit = next(b for b, x in d.boxes.items() if x.label == "fit")
    feeder = {w.tgt: w.src for w in d.wires}[box_in(fit, 1)]
    assert d.boxes[feeder.box].label is None


def test_regression_matches_semantic_figure(ontology):
    d, report = enrich(raw("regression"), ontology)
    assert is_isomorphic(d, figures.regression_semantic())


def test_empty_diagram(ontology):
    d, report = enrich(empty(), ontology)
    assert d == empty()
    assert report.to_dict()["expanded_boxes"] == 0 and report.contracted_groups == 0


@pytest.mark.parametrize("name", KMEANS + ("regression", "nested_kmeans"))
def test_report_counts_and_type_validity(ontology, name):
    r = raw(name)
    d, report = enrich(r, ontology)
    assert report.expanded_boxes + report.unannotated_boxes == r.atomic_count()
    assert d.validate_types(ontology.preorder.label_leq) == []
    again, _ = enrich(d, ontology)
    assert is_isomorphic(again, d)


def test_element_values_ride_along(ontology):
    d, _ = enrich(raw("kmeans_sklearn"), ontology)
    ids = {v.object_id for v in d.elements.values()}
    r = raw("kmeans_sklearn")
    assert ids and ids <= {v.object_id for v in r.elements.values()}


def test_slot_mismatch_strict_and_lenient():
    o = load_ontology([ONTOLOGY_DIR, NEGATIVE / "slot_mismatch.json"])
    base = load_ontology([ONTOLOGY_DIR])
    with pytest.raises(SlotMismatch):
        enrich(raw("kmeans_sklearn"), o)
    d, report = enrich(raw("kmeans_sklearn"), o, strict=False)
    assert report.skipped and report.diagnostics[0].code == "SlotMismatch"
    assert is_isomorphic(d, enrich(raw("kmeans_sklearn"), base)[0])


def test_type_conflict():
    o = load_ontology([ONTOLOGY_DIR, NEGATIVE / "port_type_conflict.json"])
    with pytest.raises(TypeConflict):
        enrich(raw("kmeans_sklearn"), o)
    _, report = enrich(raw("kmeans_sklearn"), o, strict=False)
    assert report.diagnostics[0].code == "TypeConflict"


# -- functoriality on a synthetic ontology ------------------------------------------------

SYNTHETIC = json.dumps([
    {"schema": "concept", "kind": "type", "id": "a"},
    {"schema": "concept", "kind": "type", "id": "b", "is_a": ["a"]},
    {"schema": "concept", "kind": "function", "id": "ff", "dom": "a", "cod": "b"},
    {"schema": "concept", "kind": "function", "id": "gg", "dom": "b", "cod": "a"},
    {"schema": "concept", "kind": "function", "id": "hh", "dom": {"product": ["a", "a"]}, "cod": "b"},
    {"schema": "annotation", "kind": "type", "id": "py/A", "language": "py", "package": "m",
     "concrete_name": "A", "definition": "a"},
    {"schema": "annotation", "kind": "type", "id": "py/B", "language": "py", "package": "m",
     "concrete_name": "B", "definition": "b"},
    {"schema": "annotation", "kind": "function", "id": "py/f", "language": "py", "package": "m", "function": "f",
     "inputs": [{"position": 0}], "outputs": [{"position": 0}], "definition": {"generator": "ff"}},
    {"schema": "annotation", "kind": "function", "id": "py/g", "language": "py", "package": "m", "function": "g",
     "inputs": [{"position": 0}], "outputs": [{"position": 0}, {"position": 1}],
     "definition": {"compose": [{"generator": "gg"}, {"copy": "a"}]}},
    {"schema": "annotation", "kind": "function", "id": "py/h", "language": "py", "package": "m", "function": "h",
     "inputs": [{"position": 1}, {"position": 0}], "outputs": [{"position": 0}],
     "definition": {"compose": [{"generator": "hh"}, {"generator": "gg"}, {"generator": "ff"}]}},
])

# concrete signatures; u and w have no annotation
OPS = {
    "f": (("A",), ("B",)),
    "g": (("B",), ("A", "A")),
    "h": (("A", "A"), ("B",)),
    "u": (("A",), ("B",)),
    "w": (("B", "A"), ("A",)),
}


def _concrete(ts):
    return tuple(f"py:{t}" for t in ts)


def random_program(rng, inputs, n_boxes, n_out=None, unannotated=0.3):
    """A raw diagram over OPS whose wires always join equal concrete types."""
    inputs = list(inputs)
    sources = [(outer_in(k), t) for k, t in enumerate(inputs)]
    boxes, wires = {}, []
    for i in range(n_boxes):
        pool = ["u", "w"] if rng.random() < unannotated else ["f", "g", "h"]
        op = rng.choice(pool)
        ins, outs = OPS[op]
        b = f"p{i}"
        for k, t in enumerate(ins):
            match = [s for s, st in sources if st == t]
            if match:
                src = rng.choice(match)
            else:
                src = outer_in(len(inputs))
                inputs.append(t)
                sources.append((src, t))
            wires.append(Wire(src, box_in(b, k)))
        boxes[b] = Box(_concrete(ins), _concrete(outs), f"py:m:{op}", op)
        sources.extend((box_out(b, k), t) for k, t in enumerate(outs))
    n_out = rng.randint(1, 3) if n_out is None else n_out
    outputs = []
    for k in range(n_out):
        src, t = rng.choice(sources)
        wires.append(Wire(src, outer_out(k)))
        outputs.append(t)
    return WiringDiagram(_concrete(inputs), _concrete(outputs), boxes, wires)


def _program(rng, inputs, n_boxes, n_out=None):
    # extra outer inputs may appear; callers that need exact arity retry
    while True:
        d = random_program(rng, inputs, n_boxes, n_out)
        if len(d.inputs) == len(inputs):
            return d


def test_expansion_is_functorial():
    o = loads_ontology(SYNTHETIC)
    rng = random.Random(31)
    for _ in range(30):
        f = random_program(rng, [rng.choice("AB") for _ in range(2)], rng.randint(1, 4))
        g = _program(rng, [t.split(":")[1] for t in f.outputs], rng.randint(1, 4))
        assert is_isomorphic(expand(compose(f, g), o), compose(expand(f, o), expand(g, o)))
        assert is_isomorphic(expand(product(f, g), o), product(expand(f, o), expand(g, o)))


def test_expansion_typing_and_counts():
    o = loads_ontology(SYNTHETIC)
    rng = random.Random(32)
    for _ in range(30):
        d = random_program(rng, ["A"], rng.randint(1, 6))
        out, report = enrich(d, o)
        annotated = sum(b.label[-1] in "fgh" for b in d.boxes.values())
        assert report.expanded_boxes == annotated
        assert report.expanded_boxes + report.unannotated_boxes == len(d.boxes)
        assert out.validate_types(o.preorder.label_leq) == []


# -- contraction ------------------------------------------------------------------------


def collapsed_paths(d):
    """Labeled-to-labeled connections with blank regions read as all-to-all hubs."""
    blank = {b for b, x in d.boxes.items() if x.label is None}
    region = {b: b for b in blank}

    def root(x):
        while region[x] != x:
            x = region[x]
        return x

    for w in d.wires:
        if w.src.box in blank and w.tgt.box in blank:
            region[root(w.src.box)] = root(w.tgt.box)

    def name(ep):
        if ep.box is None:
            return (ep.kind, ep.port)
        return (d.boxes[ep.box].label, ep.kind, ep.port)

    into, out_of, rel = {}, {}, set()
    for w in d.wires:
        s_blank, t_blank = w.src.box in blank, w.tgt.box in blank
        if not s_blank and not t_blank:
            rel.add((name(w.src), name(w.tgt)))
        elif t_blank and not s_blank:
            into.setdefault(root(w.tgt.box), set()).add(name(w.src))
        elif s_blank and not t_blank:
            out_of.setdefault(root(w.src.box), set()).add(name(w.tgt))
    for r in set(into) & set(out_of):
        rel.update(itertools.product(into[r], out_of[r]))
    hubs = sorted((sorted(into.get(r, ())), sorted(out_of.get(r, ()))) for r in set(into) | set(out_of))
    return rel, hubs


def _contract_corpus():
    rng = random.Random(33)
    out = []
    for i in range(50):
        d = random_diagram(rng, rng.randint(1, 9), unlabeled_rate=0.6, types=("X",))
        # unique labels make labeled boxes identifiable across contraction
        boxes = {b: (x if x.label is None else Box(x.inputs, x.outputs, f"L{k}"))
                 for k, (b, x) in enumerate(d.boxes.items())}
        out.append(WiringDiagram(d.inputs, d.outputs, boxes, d.wires))
    return out


def test_contract_without_blanks_is_identity():
    d = compose(single_box(("X",), ("X",), "f"), single_box(("X",), ("X",), "g"))
    assert is_isomorphic(contract(d), d)


def test_contract_properties():
    merged = 0
    for d in _contract_corpus():
        c = contract(d)
        assert len(c.boxes) <= len(d.boxes)
        assert is_isomorphic(contract(c), c)
        assert collapsed_paths(c) == collapsed_paths(d)
        assert len(c.topological_order()) == len(c.boxes)
        merged += len(c.boxes) < len(d.boxes)
    assert merged > 10


def test_non_convex_component_is_split():
    # blank -> labeled -> blank, with the two blanks also wired directly
    boxes = {"x": Box(("X",), ("X", "X"), None), "m": Box(("X",), ("X",), "mid"), "y": Box(("X", "X"), ("X",), None)}
    wires = [
        Wire(outer_in(0), box_in("x", 0)),
        Wire(box_out("x", 0), box_in("m", 0)),
        Wire(box_out("m", 0), box_in("y", 0)),
        Wire(box_out("x", 1), box_in("y", 1)),
        Wire(box_out("y", 0), outer_out(0)),
    ]
    d = WiringDiagram(("X",), ("X",), boxes, wires)
    c = contract(d)
    assert len(c.boxes) == 3
    assert is_isomorphic(c, d)
