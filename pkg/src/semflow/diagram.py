"""Wiring diagrams for morphisms in a cartesian category.

A diagram has ordered outer input and output ports, a set of boxes with
ordered ports of their own, and wires running from *sources* (outer inputs
and box outputs) to *targets* (box inputs and outer outputs).  Copying and
deleting are implicit: a source may feed any number of targets, while every
target is fed by exactly one wire.

Port types are plain strings, or ``None`` for the unlabeled "unknown" type,
which is compatible with everything.  Operations that check types take an
optional ``leq(a, b)`` predicate; without one, labels must match exactly.

Diagrams are treated as immutable values: every operation returns a new one.
"""

from __future__ import annotations

import re
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from .errors import (
    ArityMismatch,
    EmptySubset,
    InvalidDiagram,
    NonConvexSubset,
    TypeMismatch,
    UnknownBox,
)

Leq = Callable[[str, str], bool]

OUTER_IN = "outer_in"
OUTER_OUT = "outer_out"
BOX_IN = "box_in"
BOX_OUT = "box_out"

_KIND_ORDER = {OUTER_IN: 0, BOX_OUT: 1, BOX_IN: 2, OUTER_OUT: 3}


def natural_key(ident: str):
    """Sort key placing ``b2`` before ``b10``."""
    return tuple(int(t) if t.isdigit() else t for t in re.split(r"(\d+)", ident))


@dataclass(frozen=True)
class Endpoint:
    kind: str
    port: int
    box: str | None = None

    @property
    def is_source(self) -> bool:
        return self.kind in (OUTER_IN, BOX_OUT)

    def sort_key(self):
        return (_KIND_ORDER[self.kind], natural_key(self.box or ""), self.port)

    def __str__(self):
        if self.box is None:
            return f"{self.kind}[{self.port}]"
        return f"{self.kind}[{self.box}:{self.port}]"


def outer_in(k: int) -> Endpoint:
    return Endpoint(OUTER_IN, k)


def outer_out(k: int) -> Endpoint:
    return Endpoint(OUTER_OUT, k)


def box_in(box: str, k: int) -> Endpoint:
    return Endpoint(BOX_IN, k, box)


def box_out(box: str, k: int) -> Endpoint:
    return Endpoint(BOX_OUT, k, box)


@dataclass(frozen=True)
class Wire:
    src: Endpoint
    tgt: Endpoint

    def sort_key(self):
        return (self.src.sort_key(), self.tgt.sort_key())


@dataclass(frozen=True)
class ElementValue:
    """An observed runtime value riding on a source endpoint.

    Only ``object_id`` carries identity; the printable representation is
    informational and never compared.
    """

    object_id: str | None
    value_repr: str | None = field(default=None, compare=False)
    concrete_type: str | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Box:
    """A box: atomic when ``inner`` is None, nested otherwise.

    ``label`` references a function (a concrete function key in raw graphs,
    an ontology concept in semantic ones); ``None`` marks an unlabeled box.
    ``name`` is for display only.  Slot names, call kind, owner lineage and
    the provenance note are bookkeeping for enrichment and never affect
    isomorphism.
    """

    inputs: tuple = ()
    outputs: tuple = ()
    label: str | None = None
    name: str = ""
    inner: "WiringDiagram | None" = None
    input_slots: tuple = ()
    output_slots: tuple = ()
    call_kind: str | None = None
    lineage: tuple = ()
    note: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "input_slots", tuple(self.input_slots))
        object.__setattr__(self, "output_slots", tuple(self.output_slots))
        object.__setattr__(self, "lineage", tuple(self.lineage))
        object.__setattr__(self, "note", tuple(self.note))
        if self.inner is not None:
            if self.inner.inputs != self.inputs or self.inner.outputs != self.outputs:
                raise InvalidDiagram(
                    f"nested box {self.name!r}: outer ports differ from inner diagram"
                )

    @property
    def is_nested(self) -> bool:
        return self.inner is not None

    @property
    def display_name(self) -> str:
        if self.label is None:
            return ""
        return self.name or self.label

    def slot_name(self, direction: str, k: int) -> str | None:
        slots = self.input_slots if direction == "in" else self.output_slots
        return slots[k] if k < len(slots) else None


@dataclass(frozen=True)
class WiringDiagram:
    inputs: tuple = ()
    outputs: tuple = ()
    boxes: Mapping[str, Box] = field(default_factory=dict)
    wires: tuple = ()
    elements: Mapping[Endpoint, ElementValue] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "boxes", dict(self.boxes))
        wires = sorted(set(self.wires), key=Wire.sort_key)
        object.__setattr__(self, "wires", tuple(wires))
        elements = {k: self.elements[k] for k in sorted(self.elements, key=Endpoint.sort_key)}
        object.__setattr__(self, "elements", elements)
        self._check_structure()

    # -- structure ---------------------------------------------------------

    def port_type(self, ep: Endpoint):
        if ep.kind == OUTER_IN:
            return self.inputs[ep.port]
        if ep.kind == OUTER_OUT:
            return self.outputs[ep.port]
        box = self.boxes[ep.box]
        return box.outputs[ep.port] if ep.kind == BOX_OUT else box.inputs[ep.port]

    def _endpoint_exists(self, ep: Endpoint) -> bool:
        if ep.kind == OUTER_IN:
            return ep.box is None and 0 <= ep.port < len(self.inputs)
        if ep.kind == OUTER_OUT:
            return ep.box is None and 0 <= ep.port < len(self.outputs)
        box = self.boxes.get(ep.box)
        if box is None:
            return False
        ports = box.outputs if ep.kind == BOX_OUT else box.inputs
        return 0 <= ep.port < len(ports)

    def _check_structure(self):
        fed = defaultdict(int)
        for w in self.wires:
            if not w.src.is_source or w.tgt.is_source:
                raise InvalidDiagram(f"wire {w.src} -> {w.tgt} has the wrong direction")
            for ep in (w.src, w.tgt):
                if not self._endpoint_exists(ep):
                    raise InvalidDiagram(f"wire endpoint {ep} does not exist")
            fed[w.tgt] += 1
        for tgt in self.targets():
            if fed[tgt] != 1:
                raise InvalidDiagram(f"{tgt} has {fed[tgt]} incoming wires, expected 1")
        for ep in self.elements:
            if not ep.is_source or not self._endpoint_exists(ep):
                raise InvalidDiagram(f"element attached to {ep}, which is not a source")
        if len(self.topological_order()) != len(self.boxes):
            raise InvalidDiagram("diagram has a directed cycle")

    def targets(self):
        for k in range(len(self.outputs)):
            yield outer_out(k)
        for b, box in self.boxes.items():
            for k in range(len(box.inputs)):
                yield box_in(b, k)

    def sources(self):
        for k in range(len(self.inputs)):
            yield outer_in(k)
        for b, box in self.boxes.items():
            for k in range(len(box.outputs)):
                yield box_out(b, k)

    def source_of(self) -> dict:
        """Map each target endpoint to the source feeding it."""
        return {w.tgt: w.src for w in self.wires}

    def consumers(self) -> dict:
        """Map each source endpoint to the targets it feeds, in wire order."""
        out = defaultdict(list)
        for w in self.wires:
            out[w.src].append(w.tgt)
        return out

    def box_successors(self) -> dict:
        succ = {b: set() for b in self.boxes}
        for w in self.wires:
            if w.src.kind == BOX_OUT and w.tgt.kind == BOX_IN:
                succ[w.src.box].add(w.tgt.box)
        return succ

    def topological_order(self) -> list:
        """Kahn order over boxes, ties broken by natural box-id order."""
        import heapq

        succ = self.box_successors()
        indeg = {b: 0 for b in self.boxes}
        for b, nexts in succ.items():
            for n in nexts:
                indeg[n] += 1
        heap = [(natural_key(b), b) for b, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            _, b = heapq.heappop(heap)
            order.append(b)
            for n in succ[b]:
                indeg[n] -= 1
                if indeg[n] == 0:
                    heapq.heappush(heap, (natural_key(n), n))
        return order

    def atomic_count(self) -> int:
        return sum(
            box.inner.atomic_count() if box.is_nested else 1 for box in self.boxes.values()
        )

    def nesting_depth(self) -> int:
        depths = [box.inner.nesting_depth() + 1 for box in self.boxes.values() if box.is_nested]
        return max(depths, default=0)

    def is_flat(self) -> bool:
        return not any(box.is_nested for box in self.boxes.values())

    def validate_types(self, leq: Leq | None = None) -> list:
        """Return the wires whose source type is not below the target type."""
        bad = []
        for w in self.wires:
            if not compatible(self.port_type(w.src), self.port_type(w.tgt), leq):
                bad.append(w)
        return bad


def compatible(source, target, leq: Leq | None = None) -> bool:
    if source is None or target is None:
        return True
    if leq is None:
        return source == target
    return leq(source, target)


# -- constructors -------------------------------------------------------------


def empty() -> WiringDiagram:
    return WiringDiagram()


def identity(types: Iterable) -> WiringDiagram:
    types = tuple(types)
    wires = [Wire(outer_in(k), outer_out(k)) for k in range(len(types))]
    return WiringDiagram(types, types, {}, wires)


def single_box(
    inputs: Iterable, outputs: Iterable, label: str | None, name: str = "", box_id: str = "b0", **extra
) -> WiringDiagram:
    """A diagram holding one box wired straight through to the outer ports."""
    box = Box(tuple(inputs), tuple(outputs), label, name or (label or ""), **extra)
    wires = [Wire(outer_in(k), box_in(box_id, k)) for k in range(len(box.inputs))]
    wires += [Wire(box_out(box_id, k), outer_out(k)) for k in range(len(box.outputs))]
    return WiringDiagram(box.inputs, box.outputs, {box_id: box}, wires)


def _renamed(ep: Endpoint, mapping: Mapping[str, str]) -> Endpoint:
    if ep.box is None:
        return ep
    return Endpoint(ep.kind, ep.port, mapping[ep.box])


def rename_boxes(d: WiringDiagram, mapping: Mapping[str, str]) -> WiringDiagram:
    boxes = {mapping[b]: box for b, box in d.boxes.items()}
    wires = [Wire(_renamed(w.src, mapping), _renamed(w.tgt, mapping)) for w in d.wires]
    elements = {_renamed(ep, mapping): v for ep, v in d.elements.items()}
    return WiringDiagram(d.inputs, d.outputs, boxes, wires, elements)


def _sequential_ids(d: WiringDiagram, start: int = 0) -> dict:
    return {b: f"b{start + i}" for i, b in enumerate(sorted(d.boxes, key=natural_key))}


# -- composition --------------------------------------------------------------


def compose(f: WiringDiagram, g: WiringDiagram, leq: Leq | None = None) -> WiringDiagram:
    """Sequential composite: first ``f``, then ``g``."""
    if len(f.outputs) != len(g.inputs):
        raise ArityMismatch(f"cannot compose {len(f.outputs)} outputs into {len(g.inputs)} inputs")
    for k, (s, t) in enumerate(zip(f.outputs, g.inputs)):
        if not compatible(s, t, leq):
            raise TypeMismatch(k, s, t)
    fmap = _sequential_ids(f)
    gmap = _sequential_ids(g, len(fmap))
    f_feeds = {w.tgt.port: _renamed(w.src, fmap) for w in f.wires if w.tgt.kind == OUTER_OUT}

    boxes = {fmap[b]: box for b, box in f.boxes.items()}
    boxes.update({gmap[b]: box for b, box in g.boxes.items()})
    wires = [
        Wire(_renamed(w.src, fmap), _renamed(w.tgt, fmap))
        for w in f.wires
        if w.tgt.kind != OUTER_OUT
    ]
    for w in g.wires:
        src = f_feeds[w.src.port] if w.src.kind == OUTER_IN else _renamed(w.src, gmap)
        wires.append(Wire(src, _renamed(w.tgt, gmap)))

    elements = {_renamed(ep, fmap): v for ep, v in f.elements.items()}
    for ep, v in g.elements.items():
        key = f_feeds[ep.port] if ep.kind == OUTER_IN else _renamed(ep, gmap)
        elements.setdefault(key, v)
    return WiringDiagram(f.inputs, g.outputs, boxes, wires, elements)


def product(f: WiringDiagram, g: WiringDiagram) -> WiringDiagram:
    """Parallel composite: ``f`` and ``g`` side by side."""
    fmap = _sequential_ids(f)
    gmap = _sequential_ids(g, len(fmap))
    ni, no = len(f.inputs), len(f.outputs)

    def shift(ep: Endpoint) -> Endpoint:
        if ep.kind == OUTER_IN:
            return outer_in(ep.port + ni)
        if ep.kind == OUTER_OUT:
            return outer_out(ep.port + no)
        return _renamed(ep, gmap)

    boxes = {fmap[b]: box for b, box in f.boxes.items()}
    boxes.update({gmap[b]: box for b, box in g.boxes.items()})
    wires = [Wire(_renamed(w.src, fmap), _renamed(w.tgt, fmap)) for w in f.wires]
    wires += [Wire(shift(w.src), shift(w.tgt)) for w in g.wires]
    elements = {_renamed(ep, fmap): v for ep, v in f.elements.items()}
    elements.update({shift(ep): v for ep, v in g.elements.items()})
    return WiringDiagram(f.inputs + g.inputs, f.outputs + g.outputs, boxes, wires, elements)


def compose_all(diagrams: Iterable[WiringDiagram], leq: Leq | None = None) -> WiringDiagram:
    diagrams = list(diagrams)
    result = diagrams[0]
    for d in diagrams[1:]:
        result = compose(result, d, leq)
    return result


def product_all(diagrams: Iterable[WiringDiagram]) -> WiringDiagram:
    result = empty()
    for d in diagrams:
        result = product(result, d)
    return result


# -- substitution and encapsulation -------------------------------------------


def substitute(
    d: WiringDiagram, box_id: str, replacement: WiringDiagram, leq: Leq | None = None
) -> WiringDiagram:
    """Replace one box by a diagram with the same outer arity.

    Replacement boxes receive ids of the form ``<box_id>.<inner id>``.
    Values observed on the box's outputs move to whichever source ends up
    feeding the corresponding consumers.
    """
    if box_id not in d.boxes:
        raise UnknownBox(box_id)
    box = d.boxes[box_id]
    r = replacement
    if len(box.inputs) != len(r.inputs) or len(box.outputs) != len(r.outputs):
        raise ArityMismatch(
            f"box {box_id!r} is {len(box.inputs)}->{len(box.outputs)}, "
            f"replacement is {len(r.inputs)}->{len(r.outputs)}"
        )
    feeds = d.source_of()
    for k in range(len(box.inputs)):
        s = d.port_type(feeds[box_in(box_id, k)])
        if not compatible(s, r.inputs[k], leq):
            raise TypeMismatch(k, s, r.inputs[k])

    taken = set(d.boxes) - {box_id}
    rmap = {}
    for rb in r.boxes:
        new = f"{box_id}.{rb}"
        while new in taken:
            new += "'"
        taken.add(new)
        rmap[rb] = new
    r_feeds = r.source_of()

    def resolve(src: Endpoint) -> Endpoint:
        # Follow a source through the removed box to its final origin.
        if src.kind == BOX_OUT and src.box == box_id:
            inner = r_feeds[outer_out(src.port)]
            if inner.kind == OUTER_IN:
                return resolve(feeds[box_in(box_id, inner.port)])
            return _renamed(inner, rmap)
        return src

    def resolve_r(src: Endpoint) -> Endpoint:
        if src.kind == OUTER_IN:
            return resolve(feeds[box_in(box_id, src.port)])
        return _renamed(src, rmap)

    boxes = {}
    for b, bx in d.boxes.items():
        if b == box_id:
            boxes.update({rmap[rb]: rbx for rb, rbx in r.boxes.items()})
        else:
            boxes[b] = bx
    wires = [
        Wire(resolve(w.src), w.tgt)
        for w in d.wires
        if not (w.tgt.kind == BOX_IN and w.tgt.box == box_id)
    ]
    wires += [
        Wire(resolve_r(w.src), _renamed(w.tgt, rmap)) for w in r.wires if w.tgt.kind == BOX_IN
    ]

    elements = {ep: v for ep, v in d.elements.items() if ep.box != box_id}
    for ep, v in d.elements.items():
        if ep.box == box_id:
            elements.setdefault(resolve(ep), v)
    for ep, v in r.elements.items():
        if ep.kind == BOX_OUT:
            elements.setdefault(_renamed(ep, rmap), v)
    return WiringDiagram(d.inputs, d.outputs, boxes, wires, elements)


def is_convex(d: WiringDiagram, box_ids: Iterable[str]) -> bool:
    """True when no directed path leaves the set and later re-enters it."""
    inside = set(box_ids)
    succ = d.box_successors()
    frontier = deque(n for b in inside for n in succ[b] if n not in inside)
    seen = set(frontier)
    while frontier:
        b = frontier.popleft()
        for n in succ[b]:
            if n in inside:
                return False
            if n not in seen:
                seen.add(n)
                frontier.append(n)
    return True


def encapsulate(
    d: WiringDiagram,
    box_ids: Iterable[str],
    new_id: str | None = None,
    label: str | None = None,
    name: str = "",
) -> WiringDiagram:
    """Collapse a convex set of boxes into a single (by default unlabeled) box.

    The new box gets one input per distinct outside source feeding the set
    and one output per inside source that feeds anything outside.  Ports are
    ordered by the topological rank of the outside endpoint, then its port.
    """
    inside = set(box_ids)
    if not inside:
        raise EmptySubset("cannot encapsulate an empty set of boxes")
    for b in inside:
        if b not in d.boxes:
            raise UnknownBox(b)
    if not is_convex(d, inside):
        raise NonConvexSubset(f"boxes {sorted(inside, key=natural_key)} are not convex")

    order = d.topological_order()
    rank = {b: i for i, b in enumerate(order)}

    def ext_key(ep: Endpoint):
        if ep.kind == OUTER_IN:
            return (-1, ep.port)
        if ep.kind == OUTER_OUT:
            return (len(order), ep.port)
        return (rank[ep.box], ep.port)

    in_sources = {}
    out_sources = {}
    for w in d.wires:
        src_in = w.src.box in inside
        tgt_in = w.tgt.box in inside
        if tgt_in and not src_in:
            in_sources[w.src] = ext_key(w.src)
        elif src_in and not tgt_in:
            key = ext_key(w.tgt)
            if w.src not in out_sources or key < out_sources[w.src]:
                out_sources[w.src] = key
    ins = sorted(in_sources, key=lambda ep: in_sources[ep])
    outs = sorted(out_sources, key=lambda ep: out_sources[ep])

    if new_id is None:
        new_id = min(inside, key=natural_key)
    note = []
    for b in sorted(inside, key=lambda b: rank[b]):
        bx = d.boxes[b]
        note.extend(bx.note or ([bx.name] if bx.name else []))
    new_box = Box(
        tuple(d.port_type(ep) for ep in ins),
        tuple(d.port_type(ep) for ep in outs),
        label,
        name,
        note=tuple(note),
    )
    in_index = {ep: k for k, ep in enumerate(ins)}
    out_index = {ep: k for k, ep in enumerate(outs)}

    boxes = {b: bx for b, bx in d.boxes.items() if b not in inside}
    if new_id in boxes:
        raise InvalidDiagram(f"box id {new_id!r} is already used outside the subset")
    boxes[new_id] = new_box
    wires = []
    for w in d.wires:
        src_in = w.src.box in inside
        tgt_in = w.tgt.box in inside
        if src_in and tgt_in:
            continue
        if tgt_in:
            continue
        src = box_out(new_id, out_index[w.src]) if src_in else w.src
        wires.append(Wire(src, w.tgt))
    for ep, k in in_index.items():
        wires.append(Wire(ep, box_in(new_id, k)))

    elements = {}
    for ep, v in d.elements.items():
        if ep.box in inside:
            if ep in out_index:
                elements[box_out(new_id, out_index[ep])] = v
        else:
            elements[ep] = v
    return WiringDiagram(d.inputs, d.outputs, boxes, wires, elements)


def flatten(d: WiringDiagram) -> WiringDiagram:
    """Inline every nested box, recursively, leaving only atomic boxes."""
    for b in [b for b, box in d.boxes.items() if box.is_nested]:
        d = substitute(d, b, flatten(d.boxes[b].inner))
    return d


def remove_outputs(d: WiringDiagram, drop: Iterable[int]) -> WiringDiagram:
    """Delete some outer output ports, renumbering the rest."""
    drop = set(drop)
    keep = [k for k in range(len(d.outputs)) if k not in drop]
    index = {old: new for new, old in enumerate(keep)}
    wires = []
    for w in d.wires:
        if w.tgt.kind == OUTER_OUT:
            if w.tgt.port in drop:
                continue
            wires.append(Wire(w.src, outer_out(index[w.tgt.port])))
        else:
            wires.append(w)
    outputs = tuple(d.outputs[k] for k in keep)
    return WiringDiagram(d.inputs, outputs, d.boxes, wires, d.elements)


def with_box(d: WiringDiagram, box_id: str, box: Box) -> WiringDiagram:
    """Swap in a box with the same ports (types and metadata may differ)."""
    old = d.boxes[box_id]
    if len(old.inputs) != len(box.inputs) or len(old.outputs) != len(box.outputs):
        raise ArityMismatch(f"box {box_id!r} changes arity")
    boxes = dict(d.boxes)
    boxes[box_id] = box
    return WiringDiagram(d.inputs, d.outputs, boxes, d.wires, d.elements)


def retyped(d: WiringDiagram, inputs=None, outputs=None, boxes=None) -> WiringDiagram:
    return WiringDiagram(
        d.inputs if inputs is None else inputs,
        d.outputs if outputs is None else outputs,
        d.boxes if boxes is None else boxes,
        d.wires,
        d.elements,
    )


__all__ = [
    "Box",
    "Endpoint",
    "ElementValue",
    "Wire",
    "WiringDiagram",
    "box_in",
    "box_out",
    "compatible",
    "compose",
    "compose_all",
    "empty",
    "encapsulate",
    "flatten",
    "identity",
    "is_convex",
    "natural_key",
    "outer_in",
    "outer_out",
    "product",
    "product_all",
    "remove_outputs",
    "rename_boxes",
    "replace",
    "retyped",
    "single_box",
    "substitute",
    "with_box",
]
