"""Diagram JSON and Graphviz DOT.

JSON output uses sorted keys, two-space indentation and a trailing newline,
so writing a diagram that was just read back gives the same bytes.  Floats
never appear: ports are indices and everything else is text.
"""

from __future__ import annotations

import json
from pathlib import Path

from .diagram import (
    BOX_IN,
    BOX_OUT,
    OUTER_IN,
    OUTER_OUT,
    Box,
    ElementValue,
    Endpoint,
    Wire,
    WiringDiagram,
    natural_key,
)
from .errors import DiagramError, ParseError


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def parse_json_text(text: str, source: str = "<string>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(source, f"{exc.lineno}:{exc.colno}", exc.msg) from None


def read_json_file(path) -> object:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(str(path), f"byte {exc.start}", "not valid UTF-8") from None
    return parse_json_text(text, str(path))


# -- to JSON ------------------------------------------------------------------


def _type_ref(t):
    return {"unlabeled": True} if t is None else {"label": t}


def _endpoint(ep: Endpoint) -> dict:
    out = {"kind": ep.kind, "port": ep.port}
    if ep.box is not None:
        out["box"] = ep.box
    return out


def _box(box: Box) -> dict:
    out = {
        "kind": "nested" if box.is_nested else "atomic",
        "inputs": [_type_ref(t) for t in box.inputs],
        "outputs": [_type_ref(t) for t in box.outputs],
    }
    if box.label is not None:
        out["label"] = box.label
    if box.name != (box.label or ""):
        out["name"] = box.name
    if box.is_nested:
        out["inner"] = diagram_to_dict(box.inner)
    if box.input_slots:
        out["input_slots"] = list(box.input_slots)
    if box.output_slots:
        out["output_slots"] = list(box.output_slots)
    if box.call_kind is not None:
        out["call_kind"] = box.call_kind
    if box.lineage:
        out["lineage"] = list(box.lineage)
    if box.note:
        out["note"] = list(box.note)
    return out


def diagram_to_dict(d: WiringDiagram) -> dict:
    elements = []
    for ep, v in d.elements.items():
        item = {"endpoint": _endpoint(ep), "object_id": v.object_id}
        if v.value_repr is not None:
            item["value_repr"] = v.value_repr
        if v.concrete_type is not None:
            item["concrete_type"] = v.concrete_type
        elements.append(item)
    return {
        "inputs": [_type_ref(t) for t in d.inputs],
        "outputs": [_type_ref(t) for t in d.outputs],
        "boxes": {b: _box(d.boxes[b]) for b in sorted(d.boxes, key=natural_key)},
        "wires": [{"src": _endpoint(w.src), "tgt": _endpoint(w.tgt)} for w in d.wires],
        "elements": elements,
    }


def diagram_to_json(d: WiringDiagram) -> str:
    return dumps_json(diagram_to_dict(d))


# -- from JSON ----------------------------------------------------------------


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, where: str, message: str):
        raise ParseError(self.source, where, message)

    def need(self, obj, key, kind, where):
        if not isinstance(obj, dict) or key not in obj:
            self.fail(where, f"missing field {key!r}")
        value = obj[key]
        if not isinstance(value, kind) or isinstance(value, bool) and kind is int:
            self.fail(f"{where}.{key}", f"expected {getattr(kind, '__name__', kind)}")
        return value

    def type_ref(self, obj, where):
        if isinstance(obj, dict) and obj.get("unlabeled") is True and len(obj) == 1:
            return None
        if isinstance(obj, dict) and isinstance(obj.get("label"), str) and len(obj) == 1:
            return obj["label"]
        self.fail(where, "type ref must be {\"label\": text} or {\"unlabeled\": true}")

    def type_list(self, obj, key, where):
        return tuple(
            self.type_ref(t, f"{where}.{key}[{i}]")
            for i, t in enumerate(self.need(obj, key, list, where))
        )

    def endpoint(self, obj, where):
        kind = self.need(obj, "kind", str, where)
        port = self.need(obj, "port", int, where)
        if kind in (OUTER_IN, OUTER_OUT):
            return Endpoint(kind, port)
        if kind in (BOX_IN, BOX_OUT):
            return Endpoint(kind, port, self.need(obj, "box", str, where))
        self.fail(f"{where}.kind", f"unknown endpoint kind {kind!r}")

    def strings(self, obj, key, where):
        value = obj.get(key, [])
        if not isinstance(value, list) or not all(isinstance(s, (str, type(None))) for s in value):
            self.fail(f"{where}.{key}", "expected a list of strings")
        return tuple(value)

    def box(self, obj, where):
        if not isinstance(obj, dict):
            self.fail(where, "box must be an object")
        kind = self.need(obj, "kind", str, where)
        inputs = self.type_list(obj, "inputs", where)
        outputs = self.type_list(obj, "outputs", where)
        label = obj.get("label")
        if label is not None and not isinstance(label, str):
            self.fail(f"{where}.label", "expected text")
        inner = None
        if kind == "nested":
            inner = self.diagram(self.need(obj, "inner", dict, where), f"{where}.inner")
        elif kind != "atomic":
            self.fail(f"{where}.kind", f"unknown box kind {kind!r}")
        name = obj.get("name", label or "")
        call_kind = obj.get("call_kind")
        try:
            return Box(
                inputs,
                outputs,
                label,
                name,
                inner,
                input_slots=self.strings(obj, "input_slots", where),
                output_slots=self.strings(obj, "output_slots", where),
                call_kind=call_kind,
                lineage=self.strings(obj, "lineage", where),
                note=self.strings(obj, "note", where),
            )
        except DiagramError as exc:
            self.fail(where, str(exc))

    def diagram(self, obj, where="$"):
        if not isinstance(obj, dict):
            self.fail(where, "diagram must be an object")
        inputs = self.type_list(obj, "inputs", where)
        outputs = self.type_list(obj, "outputs", where)
        boxes = {
            b: self.box(v, f"{where}.boxes.{b}")
            for b, v in self.need(obj, "boxes", dict, where).items()
        }
        wires = []
        for i, w in enumerate(self.need(obj, "wires", list, where)):
            wires.append(
                Wire(
                    self.endpoint(self.need(w, "src", dict, f"{where}.wires[{i}]"), f"{where}.wires[{i}].src"),
                    self.endpoint(self.need(w, "tgt", dict, f"{where}.wires[{i}]"), f"{where}.wires[{i}].tgt"),
                )
            )
        elements = {}
        for i, e in enumerate(obj.get("elements", [])):
            at = f"{where}.elements[{i}]"
            ep = self.endpoint(self.need(e, "endpoint", dict, at), f"{at}.endpoint")
            if "object_id" not in e:
                self.fail(at, "missing field 'object_id'")
            elements[ep] = ElementValue(e["object_id"], e.get("value_repr"), e.get("concrete_type"))
        try:
            return WiringDiagram(inputs, outputs, boxes, wires, elements)
        except DiagramError as exc:
            self.fail(where, str(exc))


def diagram_from_dict(obj, source: str = "<string>") -> WiringDiagram:
    return _Reader(source).diagram(obj)


def diagram_from_json(text: str, source: str = "<string>") -> WiringDiagram:
    return diagram_from_dict(parse_json_text(text, source), source)


def load_diagram(path) -> WiringDiagram:
    return diagram_from_dict(read_json_file(path), str(path))


def save_diagram(d: WiringDiagram, path) -> None:
    Path(path).write_text(diagram_to_json(d), encoding="utf-8")


def looks_like_diagram(obj) -> bool:
    return isinstance(obj, dict) and {"inputs", "outputs", "boxes", "wires"} <= set(obj)


# -- DOT ----------------------------------------------------------------------


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _dot_lines(d: WiringDiagram, prefix: str, indent: str) -> list:
    lines = []
    for k in range(len(d.inputs)):
        lines.append(f"{indent}{_quote(f'{prefix}in{k}')} [shape=point];")
    for k in range(len(d.outputs)):
        lines.append(f"{indent}{_quote(f'{prefix}out{k}')} [shape=point];")
    for b in sorted(d.boxes, key=natural_key):
        box = d.boxes[b]
        node = _quote(f"{prefix}{b}")
        lines.append(f"{indent}{node} [shape=box, label={_quote(box.display_name)}];")

    def node_of(ep):
        if ep.kind == OUTER_IN:
            return _quote(f"{prefix}in{ep.port}")
        if ep.kind == OUTER_OUT:
            return _quote(f"{prefix}out{ep.port}")
        return _quote(f"{prefix}{ep.box}")

    for w in d.wires:
        t = d.port_type(w.src)
        lines.append(f"{indent}{node_of(w.src)} -> {node_of(w.tgt)} [label={_quote(t or '')}];")
    return lines


def diagram_to_dot(d: WiringDiagram, name: str = "flow") -> str:
    """One digraph: boxes are nodes named by display name, wires are edges.

    Nested boxes appear as single nodes; flatten first to see inside them.
    """
    body = _dot_lines(d, "", "  ")
    return "\n".join([f"digraph {_quote(name)} {{", "  rankdir=TB;", *body, "}"]) + "\n"


__all__ = [
    "diagram_from_dict",
    "diagram_from_json",
    "diagram_to_dict",
    "diagram_to_dot",
    "diagram_to_json",
    "dumps_json",
    "load_diagram",
    "looks_like_diagram",
    "parse_json_text",
    "read_json_file",
    "save_diagram",
]
