"""Semantic enrichment: expand annotated code, then contract the rest.

Expansion replaces every box whose concrete function has an annotation by
the diagram of that annotation's definition, and every port whose concrete
type has an annotation by the abstract type.  Boxes and types without
annotations lose their labels.  Contraction then folds each maximal
connected region of unlabeled boxes into a single unlabeled box, splitting a
region into convex parts where folding it whole would create a cycle.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace

from . import diagram as wd
from .annotations import CallKey, resolve_annotation
from .canonical import PortGraph, _dumps, canonical_relabel
from .diagram import BOX_IN, BOX_OUT, OUTER_OUT, Box, Wire, WiringDiagram
from .errors import SlotMismatch, TypeConflict
from .ontology import Diagnostic, Ontology, is_concrete_label, type_label

METHOD_KINDS = ("method", "getter", "setter")


@dataclass
class EnrichmentReport:
    expanded_boxes: int = 0
    unannotated_boxes: int = 0
    contracted_groups: int = 0
    type_hits: int = 0
    type_misses: int = 0
    skipped: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "expanded_boxes": self.expanded_boxes,
            "unannotated_boxes": self.unannotated_boxes,
            "contracted_groups": self.contracted_groups,
            "type_hits": self.type_hits,
            "type_misses": self.type_misses,
            "skipped": list(self.skipped),
            "notes": list(self.notes),
            "diagnostics": [
                {"severity": d.severity, "code": d.code, "subject": d.subject, "message": d.message}
                for d in self.diagnostics
            ],
        }


# -- concrete keys ------------------------------------------------------------


def call_key(box: Box) -> CallKey | None:
    """Recover the concrete call key from a raw box label ``lang:package:name``."""
    if not is_concrete_label(box.label):
        return None
    language, _, rest = box.label.partition(":")
    package, _, qualname = rest.partition(":")
    kind = box.call_kind or "function"
    name = qualname.rsplit(".", 1)[-1] if kind in METHOD_KINDS else qualname
    return CallKey(language, package, name, kind)


def abstract_port_type(o: Ontology, t):
    """Abstract label for a port type; ``None`` when unannotated."""
    if t is None:
        return None
    if not is_concrete_label(t):
        return t
    language, _, name = t.partition(":")
    abstract = o.abstract_type_by_name(language, name)
    return None if abstract is None else type_label(abstract)


# -- expansion ----------------------------------------------------------------


def _bind(specs, slots, what, ann_id, box_id, report):
    """Map each definition port to a box port index via its slot spec."""
    bound = []
    for spec in specs:
        if spec.slot is not None:
            if spec.slot not in slots:
                raise SlotMismatch(ann_id, box_id, f"no {what} slot named {spec.slot!r}")
            j = slots.index(spec.slot)
        else:
            if not 0 <= spec.position < len(slots):
                raise SlotMismatch(ann_id, box_id, f"no {what} at position {spec.position}")
            j = spec.position
            if slots[j] not in ("", str(j)) and any(s.slot == slots[j] for s in specs):
                report.diagnostics.append(Diagnostic(
                    "warning", "slot-conflict", box_id,
                    f"{what} position {j} is also bound by name {slots[j]!r}",
                ))
        if j in bound:
            raise SlotMismatch(ann_id, box_id, f"{what} {j} bound twice")
        bound.append(j)
    return bound


def _drop_box_outputs(d: WiringDiagram, box_id: str, keep: list) -> WiringDiagram:
    """Keep only some outputs of a box, dropping outer outputs fed by the rest."""
    box = d.boxes[box_id]
    index = {old: new for new, old in enumerate(keep)}
    dead_outer = set()
    for w in d.wires:
        if w.src.kind == BOX_OUT and w.src.box == box_id and w.src.port not in index:
            dead_outer.add(w.tgt.port)
    d = wd.remove_outputs(d, dead_outer)
    wires = []
    for w in d.wires:
        if w.src.kind == BOX_OUT and w.src.box == box_id:
            wires.append(Wire(wd.box_out(box_id, index[w.src.port]), w.tgt))
        else:
            wires.append(w)
    elements = {}
    for ep, v in d.elements.items():
        if ep.kind == BOX_OUT and ep.box == box_id:
            if ep.port in index:
                elements[wd.box_out(box_id, index[ep.port])] = v
        else:
            elements[ep] = v
    boxes = dict(d.boxes)
    boxes[box_id] = replace(
        box,
        outputs=tuple(box.outputs[j] for j in keep),
        output_slots=tuple(box.output_slots[j] for j in keep if j < len(box.output_slots)),
    )
    return WiringDiagram(d.inputs, d.outputs, boxes, wires, elements)


def _check_port(o, concrete, abstract_port, where, report, strict):
    a = abstract_port_type(o, concrete)
    if a is None or abstract_port is None:
        return
    if not o.preorder.label_leq(a, abstract_port):
        raise TypeConflict(where, f"{concrete} is {a}, not a subtype of {abstract_port}")


def _expand_box(d, box_id, ann, o, report, strict):
    box = d.boxes[box_id]
    definition = o.term_to_diagram(ann.definition)
    in_slots = list(box.input_slots) or [str(k) for k in range(len(box.inputs))]
    out_slots = list(box.output_slots) or [
        "return" if len(box.outputs) == 1 else f"return.{k}" for k in range(len(box.outputs))
    ]
    bound_in = _bind(ann.inputs, in_slots, "input", ann.id, box_id, report)
    bound_out = _bind(ann.outputs, out_slots, "output", ann.id, box_id, report)
    if len(bound_in) != len(definition.inputs) or len(bound_out) != len(definition.outputs):
        raise SlotMismatch(ann.id, box_id, "slot count differs from the definition's ports")

    consumers = d.consumers()
    for j in range(len(box.outputs)):
        if j not in bound_out and any(t.kind != OUTER_OUT for t in consumers.get(wd.box_out(box_id, j), [])):
            raise SlotMismatch(ann.id, box_id, f"output {out_slots[j]!r} is used but not annotated")
    for i, j in enumerate(bound_in):
        _check_port(o, box.inputs[j], definition.inputs[i], f"{box_id}.in[{j}]", report, strict)
    for k, j in enumerate(bound_out):
        _check_port(o, box.outputs[j], definition.outputs[k], f"{box_id}.out[{j}]", report, strict)

    keep = sorted(bound_out)
    d = _drop_box_outputs(d, box_id, keep)
    reduced = d.boxes[box_id]
    position = {old: new for new, old in enumerate(keep)}
    feeds = definition.source_of()
    wires = []
    for w in definition.wires:
        if w.tgt.kind == OUTER_OUT:
            continue
        src = wd.outer_in(bound_in[w.src.port]) if w.src.kind == wd.OUTER_IN else w.src
        wires.append(Wire(src, w.tgt))
    for k, j in enumerate(bound_out):
        src = feeds[wd.outer_out(k)]
        if src.kind == wd.OUTER_IN:
            src = wd.outer_in(bound_in[src.port])
        wires.append(Wire(src, wd.outer_out(position[j])))
    replacement = WiringDiagram(reduced.inputs, reduced.outputs, definition.boxes, wires)
    return wd.substitute(d, box_id, replacement, leq=lambda a, b: True)


def expand(raw: WiringDiagram, o: Ontology, strict: bool = True, report: EnrichmentReport | None = None):
    """Replace annotated boxes by their definitions and retype every port."""
    report = report if report is not None else EnrichmentReport()
    d = raw
    for box_id in d.topological_order():
        box = d.boxes[box_id]
        if box.is_nested:
            raise ValueError("expand needs a flat diagram; call flatten first")
        key = call_key(box)
        if key is None:
            if box.label is None:
                report.unannotated_boxes += 1
            else:
                report.expanded_boxes += 1
            continue
        ann = resolve_annotation(o, key, box.lineage)
        if ann is not None:
            try:
                d = _expand_box(d, box_id, ann, o, report, strict)
                report.expanded_boxes += 1
                continue
            except (SlotMismatch, TypeConflict) as exc:
                if strict:
                    raise
                report.skipped.append(box_id)
                report.diagnostics.append(Diagnostic("warning", type(exc).__name__, box_id, str(exc)))
        report.unannotated_boxes += 1
        d = wd.with_box(d, box_id, replace(box, label=None, note=(box.name,) if box.name else ()))
    return _retype(d, o, report, strict)


def _retype(d: WiringDiagram, o: Ontology, report: EnrichmentReport, strict: bool) -> WiringDiagram:
    def conv(t):
        if t is not None and is_concrete_label(t):
            a = abstract_port_type(o, t)
            if a is None:
                report.type_misses += 1
            else:
                report.type_hits += 1
            return a
        return t

    boxes = {
        b: replace(box, inputs=tuple(conv(t) for t in box.inputs), outputs=tuple(conv(t) for t in box.outputs))
        for b, box in d.boxes.items()
    }
    out = WiringDiagram(
        tuple(conv(t) for t in d.inputs), tuple(conv(t) for t in d.outputs), boxes, d.wires, d.elements
    )
    for w in out.validate_types(o.preorder.label_leq):
        msg = f"{out.port_type(w.src)} flows into {out.port_type(w.tgt)}"
        if strict:
            raise TypeConflict(f"{w.src} -> {w.tgt}", msg)
        report.diagnostics.append(Diagnostic("warning", "TypeConflict", str(w.tgt), msg))
    return out


# -- contraction --------------------------------------------------------------


def unlabeled_components(d: WiringDiagram) -> list:
    """Connected components of unlabeled boxes, each in topological order."""
    unlabeled = {b for b, box in d.boxes.items() if box.label is None}
    parent = {b: b for b in unlabeled}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for w in d.wires:
        if w.src.box in unlabeled and w.tgt.box in unlabeled:
            a, b = find(w.src.box), find(w.tgt.box)
            if a != b:
                parent[a] = b
    groups = defaultdict(list)
    for b in d.topological_order():
        if b in unlabeled:
            groups[find(b)].append(b)
    return list(groups.values())


def _adjacent(d: WiringDiagram) -> dict:
    adj = defaultdict(set)
    for w in d.wires:
        if w.src.kind == BOX_OUT and w.tgt.kind == BOX_IN:
            adj[w.src.box].add(w.tgt.box)
            adj[w.tgt.box].add(w.src.box)
    return adj


def convex_parts(d: WiringDiagram, component: list) -> list:
    """Greedy split of a connected component into connected convex parts."""
    adj = _adjacent(d)
    parts = []
    for b in component:
        for part in parts:
            if adj[b] & part and wd.is_convex(d, part | {b}):
                part.add(b)
                break
        else:
            parts.append({b})
    return parts


def contract(expanded: WiringDiagram, report: EnrichmentReport | None = None) -> WiringDiagram:
    """Fold maximal connected unlabeled regions into single unlabeled boxes."""
    d = canonical_relabel(expanded)
    changed = True
    while changed:
        changed = False
        for component in unlabeled_components(d):
            if len(component) < 2:
                continue
            for part in convex_parts(d, component):
                if len(part) < 2 or not wd.is_convex(d, part):
                    continue
                d = wd.encapsulate(d, part)
                changed = True
                if report is not None:
                    report.contracted_groups += 1
            if changed:
                break
    return d


def enrich(raw: WiringDiagram, o: Ontology, strict: bool = True):
    """Flatten, expand and contract; returns the diagram and a report."""
    report = EnrichmentReport()
    flat = wd.flatten(raw)
    expanded = expand(flat, o, strict=strict, report=report)
    result = contract(expanded, report)
    for b in sorted(result.boxes, key=wd.natural_key):
        box = result.boxes[b]
        if box.label is None and box.note:
            report.notes.append({"box": b, "subsumes": list(box.note)})
    return result, report


# -- comparison surface -------------------------------------------------------


def labeled_substructure(d: WiringDiagram) -> PortGraph:
    """Labeled boxes and their wiring, with unlabeled regions as hub vertices.

    Outer ports are dropped.  Each connected region of unlabeled boxes that
    touches a labeled box becomes one ``hub`` vertex, so two diagrams that
    differ only inside their blank boxes give isomorphic graphs.
    """
    comps = unlabeled_components(d)
    hub_of = {b: f"hub{i}" for i, comp in enumerate(comps) for b in comp}
    g = PortGraph()
    for b, box in d.boxes.items():
        if box.label is not None:
            g.add_node(("box", b), _dumps([box.label, list(box.inputs), list(box.outputs)]))
    edges = set()
    used_hubs = set()
    for w in d.wires:
        if w.src.kind != BOX_OUT or w.tgt.kind != BOX_IN:
            continue
        s_lab = d.boxes[w.src.box].label is not None
        t_lab = d.boxes[w.tgt.box].label is not None
        if s_lab and t_lab:
            edges.add((("box", w.src.box), w.src.port, ("box", w.tgt.box), w.tgt.port))
        elif s_lab:
            hub = ("hub", hub_of[w.tgt.box])
            used_hubs.add(hub)
            edges.add((("box", w.src.box), w.src.port, hub, 0))
        elif t_lab:
            hub = ("hub", hub_of[w.src.box])
            used_hubs.add(hub)
            edges.add((hub, 0, ("box", w.tgt.box), w.tgt.port))
    for hub in used_hubs:
        g.add_node(hub, _dumps(["hub"]))
    g.edges = sorted(edges, key=repr)
    return g


def labeled_form(d: WiringDiagram) -> str:
    from .canonical import canonical_encoding

    return canonical_encoding(labeled_substructure(d))


def labeled_isomorphic(a: WiringDiagram, b: WiringDiagram) -> bool:
    return labeled_form(a) == labeled_form(b)


__all__ = [
    "EnrichmentReport",
    "abstract_port_type",
    "call_key",
    "contract",
    "convex_parts",
    "enrich",
    "expand",
    "labeled_form",
    "labeled_isomorphic",
    "labeled_substructure",
    "unlabeled_components",
]
