import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import glue_compose, random_diagram, substitute_all_at_once
from semflow.canonical import is_isomorphic
from semflow.diagram import (
    Box,
    ElementValue,
    Wire,
    WiringDiagram,
    box_in,
    box_out,
    compose,
    compose_all,
    empty,
    encapsulate,
    flatten,
    identity,
    is_convex,
    outer_in,
    outer_out,
    product,
    single_box,
    substitute,
)
from semflow.errors import (
    ArityMismatch,
    EmptySubset,
    InvalidDiagram,
    NonConvexSubset,
    TypeMismatch,
    UnknownBox,
)


def leq_chain(a, b):
    order = {"matrix": {"matrix", "array", "table"}, "array": {"array"}, "table": {"table"}}
    return b in order.get(a, {a})


def chain(*labels, t="X"):
    return compose_all(single_box((t,), (t,), lab) for lab in labels)


# -- construction and validation ----------------------------------------------


def test_target_needs_exactly_one_feeder():
    with pytest.raises(InvalidDiagram):
        WiringDiagram(("X",), ("X",), {}, [])
    with pytest.raises(InvalidDiagram):
        WiringDiagram(
            ("X", "X"), ("X",), {}, [Wire(outer_in(0), outer_out(0)), Wire(outer_in(1), outer_out(0))]
        )


def test_fan_out_and_deletion_are_legal():
    d = WiringDiagram(("X", "X"), ("X", "X"), {}, [Wire(outer_in(0), outer_out(0)), Wire(outer_in(0), outer_out(1))])
    assert len(d.consumers()[outer_in(0)]) == 2
    assert d.consumers().get(outer_in(1), []) == []


def test_cycles_are_rejected():
    boxes = {"a": Box(("X",), ("X",), "f"), "b": Box(("X",), ("X",), "g")}
    wires = [Wire(box_out("a", 0), box_in("b", 0)), Wire(box_out("b", 0), box_in("a", 0))]
    with pytest.raises(InvalidDiagram):
        WiringDiagram((), (), boxes, wires)


def test_elements_only_on_sources():
    d = identity(["X"])
    with pytest.raises(InvalidDiagram):
        WiringDiagram(d.inputs, d.outputs, {}, d.wires, {outer_out(0): ElementValue("o1")})


def test_element_identity_ignores_repr():
    assert ElementValue("o1", "1.0") == ElementValue("o1", "1.00", "float")


def test_validate_types_uses_preorder_and_unlabeled():
    d = compose(single_box(("A",), ("matrix",), "f"), single_box(("array",), ("B",), "g"), leq_chain)
    assert d.validate_types(leq_chain) == []
    bad = compose(single_box(("A",), ("array",), "f"), single_box((None,), ("B",), "g"))
    assert bad.validate_types(leq_chain) == []


def test_empty_diagram_is_legal():
    e = empty()
    assert e.inputs == () and e.boxes == {} and e.wires == ()


# -- compose --------------------------------------------------------------------


def test_compose_identities():
    assert is_isomorphic(compose(identity(["X"]), identity(["X"])), identity(["X"]))


def test_compose_two_boxes_makes_chain():
    d = compose(single_box(("X",), ("Y",), "f"), single_box(("Y",), ("Z",), "g"))
    assert len(d.boxes) == 2
    internal = [w for w in d.wires if w.src.box and w.tgt.box]
    assert len(internal) == 1
    assert d.inputs == ("X",) and d.outputs == ("Z",)


def test_compose_errors():
    f = single_box(("X",), ("Y",), "f")
    with pytest.raises(ArityMismatch):
        compose(f, single_box(("Y", "Y"), ("Z",), "g"))
    with pytest.raises(TypeMismatch) as info:
        compose(f, single_box(("W",), ("Z",), "g"))
    assert info.value.index == 0


def test_compose_respects_subtypes():
    compose(single_box((), ("matrix",), "f"), single_box(("table",), (), "g"), leq_chain)
    with pytest.raises(TypeMismatch):
        compose(single_box((), ("array",), "f"), single_box(("matrix",), (), "g"), leq_chain)


def test_compose_elements_prefer_left():
    f = WiringDiagram((), ("X",), {"a": Box((), ("X",), "f")}, [Wire(box_out("a", 0), outer_out(0))],
                      {box_out("a", 0): ElementValue("left")})
    g = WiringDiagram(("X",), ("X",), {}, [Wire(outer_in(0), outer_out(0))], {outer_in(0): ElementValue("right")})
    d = compose(f, g)
    assert [v.object_id for v in d.elements.values()] == ["left"]


def _same_arity_pair(rng):
    while True:
        f = random_diagram(rng, 3, n_in=2, n_out=2)
        if len(f.outputs) == 2:
            g = random_diagram(rng, 3, n_in=2, n_out=2)
            return f, g


def test_compose_matches_gluing_oracle():
    rng = random.Random(11)
    for _ in range(6):
        f, g = _same_arity_pair(rng)
        assert is_isomorphic(compose(f, g), glue_compose(f, g))


def test_compose_associative_and_unital():
    rng = random.Random(12)
    for _ in range(20):
        a, b, c = (random_diagram(rng, 2, n_in=1, n_out=1) for _ in range(3))
        if not (a.outputs and b.outputs and c.outputs):
            continue
        assert is_isomorphic(compose(compose(a, b), c), compose(a, compose(b, c)))
        assert is_isomorphic(compose(identity(a.inputs), a), a)
        assert is_isomorphic(compose(a, identity(a.outputs)), a)


# -- product --------------------------------------------------------------------


def test_product_unit():
    d = single_box(("X",), ("Y",), "f")
    assert is_isomorphic(product(empty(), d), d)
    assert is_isomorphic(product(d, empty()), d)


def test_product_two_boxes():
    d = product(single_box(("X",), ("Y",), "f"), single_box(("W",), ("Z",), "g"))
    assert len(d.boxes) == 2
    assert d.inputs == ("X", "W") and d.outputs == ("Y", "Z")
    assert all(not (w.src.box and w.tgt.box) for w in d.wires)


def test_product_box_counts_add():
    rng = random.Random(13)
    for _ in range(50):
        a = random_diagram(rng, rng.randint(0, 4))
        b = random_diagram(rng, rng.randint(0, 4))
        assert len(product(a, b).boxes) == len(a.boxes) + len(b.boxes)


def test_product_associative_and_interchange():
    rng = random.Random(14)
    for _ in range(20):
        f, g, h, k = (random_diagram(rng, 2, n_in=1, n_out=1) for _ in range(4))
        if not all(x.outputs for x in (f, g, h, k)):
            continue
        assert is_isomorphic(product(product(f, g), h), product(f, product(g, h)))
        lhs = compose(product(f, g), product(h, k))
        rhs = product(compose(f, h), compose(g, k))
        assert is_isomorphic(lhs, rhs)


# -- substitute -------------------------------------------------------------------


def test_substitute_same_label_is_identity():
    d = chain("f", "g", "h")
    b = next(iter(d.boxes))
    bx = d.boxes[b]
    out = substitute(d, b, single_box(bx.inputs, bx.outputs, bx.label))
    assert is_isomorphic(out, d)


def test_substitute_errors():
    d = chain("f")
    with pytest.raises(UnknownBox):
        substitute(d, "nope", identity(["X"]))
    with pytest.raises(ArityMismatch):
        substitute(d, "b0", identity(["X", "X"]))
    with pytest.raises(TypeMismatch):
        substitute(d, "b0", single_box(("Q",), ("X",), "f"))


def test_substitute_by_identity_removes_box_and_moves_values():
    d = WiringDiagram(
        ("X",), ("X",), {"a": Box(("X",), ("X",), "f")},
        [Wire(outer_in(0), box_in("a", 0)), Wire(box_out("a", 0), outer_out(0))],
        {box_out("a", 0): ElementValue("o7")},
    )
    out = substitute(d, "a", identity(["X"]))
    assert out.boxes == {}
    assert out.elements == {outer_in(0): ElementValue("o7")}


def test_substitute_all_boxes_matches_one_pass():
    rng = random.Random(15)
    for _ in range(30):
        d = random_diagram(rng, rng.randint(1, 4))
        reps = {}
        for b, bx in d.boxes.items():
            r = random_diagram(rng, rng.randint(0, 2), n_in=len(bx.inputs), n_out=len(bx.outputs))
            if len(r.outputs) != len(bx.outputs):
                r = single_box(bx.inputs, bx.outputs, "r" + bx.label)
            reps[b] = r
        seq = d
        for b, r in reps.items():
            seq = substitute(seq, b, r)
        assert is_isomorphic(seq, substitute_all_at_once(d, reps))


# -- encapsulate ------------------------------------------------------------------


def test_encapsulate_single_unlabeled_box_is_identity():
    d = compose_all([single_box(("X",), ("X",), "f"), single_box(("X",), ("X",), None),
                     single_box(("X",), ("X",), "g")])
    blank = next(b for b, bx in d.boxes.items() if bx.label is None)
    assert is_isomorphic(encapsulate(d, {blank}), d)


def test_encapsulate_errors():
    d = chain("f", "g", "h")
    with pytest.raises(EmptySubset):
        encapsulate(d, set())
    with pytest.raises(UnknownBox):
        encapsulate(d, {"zz"})
    ends = {b for b, bx in d.boxes.items() if bx.label in ("f", "h")}
    with pytest.raises(NonConvexSubset):
        encapsulate(d, ends)


def test_encapsulate_drop_values_chain():
    d = compose_all([
        single_box(("df",), ("df",), "python:pandas:NDFrame.drop"),
        single_box(("df",), ("nd",), "python:builtins:DataFrame.values"),
        single_box(("nd",), ("m",), "fit"),
    ])
    ids = {b for b, bx in d.boxes.items() if bx.label != "fit"}
    out = encapsulate(d, ids)
    assert len(out.boxes) == 2
    blank = next(bx for bx in out.boxes.values() if bx.label is None)
    assert (blank.inputs, blank.outputs) == (("df",), ("nd",))
    assert blank.display_name == ""
    assert blank.note == ("python:pandas:NDFrame.drop", "python:builtins:DataFrame.values")


def _cut_types(d, inside):
    ins, outs = {}, {}
    for w in d.wires:
        a, b = w.src.box in inside, w.tgt.box in inside
        if b and not a:
            ins[w.src] = d.port_type(w.src)
        if a and not b:
            outs[w.src] = d.port_type(w.src)
    return Counter(ins.values()), Counter(outs.values())


def test_encapsulate_boundary_matches_edge_scan():
    rng = random.Random(16)
    done = 0
    while done < 40:
        d = random_diagram(rng, rng.randint(2, 6), types=("X", "Y"))
        ids = list(d.boxes)
        subset = set(rng.sample(ids, rng.randint(1, len(ids))))
        if not is_convex(d, subset):
            continue
        out = encapsulate(d, subset, new_id="new")
        box = out.boxes["new"]
        assert (Counter(box.inputs), Counter(box.outputs)) == _cut_types(d, subset)
        assert is_isomorphic(encapsulate(out, {"new"}), out)
        done += 1


def test_encapsulate_keeps_boundary_values_only():
    d = chain("f", "g", "h")
    order = d.topological_order()
    vals = {box_out(b, 0): ElementValue(f"v{i}") for i, b in enumerate(order)}
    d = WiringDiagram(d.inputs, d.outputs, d.boxes, d.wires, vals)
    out = encapsulate(d, set(order[:2]), new_id="n")
    assert {v.object_id for v in out.elements.values()} == {"v1", "v2"}


# -- flatten -----------------------------------------------------------------------


def _nest(d, label="outer"):
    return single_box(d.inputs, d.outputs, label, inner=d)


def test_flatten_atomic_is_identity():
    d = chain("f", "g")
    assert flatten(d) == d


def test_flatten_two_levels():
    inner2 = chain("a", "b", "c")
    level1 = compose(chain("x", "y"), _nest(inner2))
    d = _nest(level1)
    assert d.nesting_depth() == 2
    flat = flatten(d)
    assert flat.is_flat() and len(flat.boxes) == 5
    assert d.atomic_count() == 5


def test_flatten_idempotent_on_random_nestings():
    rng = random.Random(17)
    for _ in range(30):
        d = random_diagram(rng, 3, n_in=1, n_out=1)
        boxes = dict(d.boxes)
        for b in rng.sample(list(boxes), rng.randint(1, len(boxes))):
            bx = boxes[b]
            inner = random_diagram(rng, 2, n_in=len(bx.inputs), n_out=len(bx.outputs))
            if len(inner.outputs) != len(bx.outputs):
                continue
            boxes[b] = Box(bx.inputs, bx.outputs, bx.label, inner=inner)
        d = WiringDiagram(d.inputs, d.outputs, boxes, d.wires)
        once = flatten(d)
        assert once.is_flat()
        assert flatten(once) == once
        assert len(once.boxes) == d.atomic_count()


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=0, max_value=6))
def test_random_diagrams_stay_acyclic_under_operations(seed, n):
    rng = random.Random(seed)
    d = random_diagram(rng, n)
    assert len(d.topological_order()) == len(d.boxes)
    p = product(d, d)
    assert len(p.topological_order()) == 2 * len(d.boxes)
