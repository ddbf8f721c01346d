"""Loading, checking and resolving concepts and annotations.

Ontology files are JSON.  Each file holds one document or an array of
documents, and every document says what it is with a ``"schema"`` field:

``{"schema": "concept", "kind": "type", "id": "matrix", "is_a": ["array", "table"]}``
    a type concept and its basic supertypes.
``{"schema": "concept", "kind": "function", "id": "fit", "dom": ..., "cod": ..., "is_a": [...]}``
    a function concept; ``"definition"`` (a term) makes it compound.
``{"schema": "concept", "kind": "equation", "lhs": ..., "rhs": ...}``
    an equation between terms; stored, but see :func:`terms_equal`.
``{"schema": "annotation", "kind": "type", "id", "language", "package", "concrete_name", "definition"}``
    maps a concrete type onto a type expression.
``{"schema": "annotation", "kind": "function", "id", "language", "package", "function", "definition", ...}``
    maps a concrete function onto a term.  Optional fields:
    ``function_kind`` (function, method, getter, setter, operator),
    ``owner_type`` for methods and accessors, and ``inputs``/``outputs``
    slot lists such as ``{"slot": "X"}``, ``{"position": 0}``, with optional
    ``"mutated": true`` and ``"type"`` (a concrete type name).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import (
    AmbiguousAnnotation,
    CompositionTypeError,
    DuplicateId,
    FunctorialityViolation,
    IllTypedTerm,
    ParseError,
    UnknownGenerator,
    UnresolvedReference,
)
from .ontology import (
    Diagnostic,
    Equation,
    FunctionAnnotation,
    FunctionConcept,
    Ontology,
    SlotSpec,
    TypeAnnotation,
    TypeConcept,
    basics_of,
    factors,
    generators_of,
    infer_type,
    term_from_json,
    term_to_json,
    type_from_json,
    type_label,
    type_to_json,
    types_of_term,
)
from .serialize import dumps_json, parse_json_text

CONCEPT_ID = re.compile(r"^[a-z0-9-]+$")
ANNOTATION_ID = re.compile(r"^[A-Za-z0-9_.:/-]+$")
FUNCTION_KINDS = ("function", "method", "getter", "setter", "operator")
METHOD_KINDS = ("method", "getter", "setter")


@dataclass(frozen=True)
class CallKey:
    language: str
    package: str
    name: str
    kind: str = "function"


# -- parsing ------------------------------------------------------------------


class _DocReader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, where, message):
        raise ParseError(self.source, where, message)

    def text(self, doc, key, where, required=True, pattern=None):
        if key not in doc:
            if required:
                self.fail(where, f"missing field {key!r}")
            return None
        value = doc[key]
        if not isinstance(value, str):
            self.fail(f"{where}.{key}", "expected text")
        if pattern is not None and not pattern.match(value):
            self.fail(f"{where}.{key}", f"malformed id {value!r}")
        return value

    def ids(self, doc, key, where):
        value = doc.get(key, [])
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            self.fail(f"{where}.{key}", "expected a list of ids")
        return tuple(value)

    def type_expr(self, doc, key, where):
        if key not in doc:
            self.fail(where, f"missing field {key!r}")
        try:
            return type_from_json(doc[key])
        except ValueError as exc:
            self.fail(f"{where}.{key}", str(exc))

    def term(self, doc, key, where, required=True):
        if key not in doc:
            if required:
                self.fail(where, f"missing field {key!r}")
            return None
        try:
            return term_from_json(doc[key])
        except ValueError as exc:
            self.fail(f"{where}.{key}", str(exc))

    def slots(self, doc, key, where):
        value = doc.get(key, [])
        if not isinstance(value, list):
            self.fail(f"{where}.{key}", "expected a list of slots")
        out = []
        for i, s in enumerate(value):
            at = f"{where}.{key}[{i}]"
            if not isinstance(s, dict):
                self.fail(at, "slot must be an object")
            slot, position = s.get("slot"), s.get("position")
            if (slot is None) == (position is None):
                self.fail(at, "slot needs exactly one of 'slot' or 'position'")
            if slot is not None and not isinstance(slot, str):
                self.fail(at, "'slot' must be text")
            if position is not None and (isinstance(position, bool) or not isinstance(position, int)):
                self.fail(at, "'position' must be an integer")
            mutated = s.get("mutated", False)
            if not isinstance(mutated, bool):
                self.fail(at, "'mutated' must be true or false")
            concrete = s.get("type")
            if concrete is not None and not isinstance(concrete, str):
                self.fail(at, "'type' must be text")
            out.append(SlotSpec(slot, position, mutated, concrete))
        return tuple(out)

    def document(self, doc, where):
        if not isinstance(doc, dict):
            self.fail(where, "document must be an object")
        schema = doc.get("schema")
        kind = doc.get("kind")
        if schema == "concept" and kind == "type":
            return TypeConcept(
                self.text(doc, "id", where, pattern=CONCEPT_ID),
                self.ids(doc, "is_a", where),
                self.text(doc, "description", where, required=False),
            )
        if schema == "concept" and kind == "function":
            return FunctionConcept(
                self.text(doc, "id", where, pattern=CONCEPT_ID),
                self.type_expr(doc, "dom", where),
                self.type_expr(doc, "cod", where),
                self.ids(doc, "is_a", where),
                self.term(doc, "definition", where, required=False),
                self.text(doc, "description", where, required=False),
            )
        if schema == "concept" and kind == "equation":
            return Equation(self.term(doc, "lhs", where), self.term(doc, "rhs", where))
        if schema == "annotation" and kind == "type":
            return TypeAnnotation(
                self.text(doc, "id", where, pattern=ANNOTATION_ID),
                self.text(doc, "language", where),
                self.text(doc, "package", where),
                self.text(doc, "concrete_name", where),
                self.type_expr(doc, "definition", where),
                self.text(doc, "description", where, required=False),
            )
        if schema == "annotation" and kind == "function":
            fkind = self.text(doc, "function_kind", where, required=False) or "function"
            if fkind not in FUNCTION_KINDS:
                self.fail(f"{where}.function_kind", f"unknown function kind {fkind!r}")
            return FunctionAnnotation(
                self.text(doc, "id", where, pattern=ANNOTATION_ID),
                self.text(doc, "language", where),
                self.text(doc, "package", where),
                self.text(doc, "function", where),
                self.term(doc, "definition", where),
                fkind,
                self.text(doc, "owner_type", where, required=False),
                self.slots(doc, "inputs", where),
                self.slots(doc, "outputs", where),
                self.text(doc, "description", where, required=False),
            )
        self.fail(where, f"unknown document schema/kind {schema!r}/{kind!r}")


def parse_documents(text: str, source: str = "<string>") -> list:
    data = parse_json_text(text, source)
    reader = _DocReader(source)
    if isinstance(data, list):
        return [reader.document(d, f"$[{i}]") for i, d in enumerate(data)]
    return [reader.document(data, "$")]


def _read_documents(path) -> list:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(str(path), f"byte {exc.start}", "not valid UTF-8") from None
    return parse_documents(text, str(path))


# -- linking ------------------------------------------------------------------


def build_ontology(documents: Iterable, strict: bool = True) -> Ontology:
    """Link parsed documents into an :class:`Ontology`.

    Reference and duplicate errors always raise.  Ill-typed definitions and
    functoriality violations raise in strict mode; otherwise they become
    error diagnostics and the offending annotation is marked invalid.
    """
    types, functions, equations = {}, {}, []
    type_anns, fun_anns = {}, {}
    ann_keys = set()
    for doc in documents:
        if isinstance(doc, TypeConcept):
            if doc.id in types:
                raise DuplicateId(doc.id)
            types[doc.id] = doc
        elif isinstance(doc, FunctionConcept):
            if doc.id in functions:
                raise DuplicateId(doc.id)
            functions[doc.id] = doc
        elif isinstance(doc, Equation):
            equations.append(doc)
        else:
            if doc.id in type_anns or doc.id in fun_anns:
                raise DuplicateId(doc.id)
            if isinstance(doc, TypeAnnotation):
                if doc.key in ann_keys:
                    raise DuplicateId("/".join(doc.key))
                ann_keys.add(doc.key)
                type_anns[doc.id] = doc
            else:
                fun_anns[doc.id] = doc

    def need_types(ids, context):
        for t in sorted(ids):
            if t not in types:
                raise UnresolvedReference(t, context)

    def need_functions(ids, context):
        for f in sorted(ids):
            if f not in functions:
                raise UnresolvedReference(f, context)

    for t in types.values():
        need_types(t.is_a, f"type {t.id}")
    for f in functions.values():
        need_types(basics_of(f.dom) | basics_of(f.cod), f"function {f.id}")
        need_functions(f.is_a, f"function {f.id}")
        if f.definition is not None:
            need_functions(generators_of(f.definition), f"function {f.id}")
            need_types(types_of_term(f.definition), f"function {f.id}")
    for i, eq in enumerate(equations):
        for side in (eq.lhs, eq.rhs):
            need_functions(generators_of(side), f"equation {i}")
            need_types(types_of_term(side), f"equation {i}")
    for a in type_anns.values():
        need_types(basics_of(a.definition), f"annotation {a.id}")
    for a in fun_anns.values():
        need_functions(generators_of(a.definition), f"annotation {a.id}")
        need_types(types_of_term(a.definition), f"annotation {a.id}")

    base = Ontology(types, functions, tuple(equations), type_anns, fun_anns)
    diagnostics, invalid = _check_definitions(base, strict)
    return Ontology(
        types, functions, tuple(equations), type_anns, fun_anns, tuple(diagnostics), frozenset(invalid)
    )


def _check_definitions(o: Ontology, strict: bool):
    diagnostics, invalid = [], set()

    def problem(subject, code, message, exc):
        if strict:
            raise exc
        diagnostics.append(Diagnostic("error", code, subject, message))
        invalid.add(subject)

    for f in sorted(o.functions.values(), key=lambda f: f.id):
        if f.definition is None:
            continue
        try:
            dom, cod = o.infer_type(f.definition)
        except (CompositionTypeError, IllTypedTerm, UnknownGenerator) as exc:
            problem(f.id, "ill-typed-definition", str(exc), IllTypedTerm(f"{f.id}: {exc}"))
            continue
        if not (o.leq(f.dom, dom) and o.leq(cod, f.cod)):
            msg = (
                f"definition has type {type_label(dom)} -> {type_label(cod)}, "
                f"declared {type_label(f.dom)} -> {type_label(f.cod)}"
            )
            problem(f.id, "ill-typed-definition", msg, IllTypedTerm(f"{f.id}: {msg}"))

    for a in sorted(o.function_annotations.values(), key=lambda a: a.id):
        try:
            dom, cod = o.infer_type(a.definition)
        except (CompositionTypeError, IllTypedTerm, UnknownGenerator) as exc:
            problem(a.id, "ill-typed-definition", str(exc), IllTypedTerm(f"{a.id}: {exc}"))
            continue
        for direction, slots, ports in (("input", a.inputs, factors(dom)), ("output", a.outputs, factors(cod))):
            if len(slots) != len(ports):
                msg = f"{len(slots)} {direction} slots but the definition has {len(ports)} {direction} ports"
                problem(a.id, "functoriality", msg, FunctorialityViolation(a.id, direction, msg))
                break
            bad = _slot_type_violation(o, a, slots, ports)
            if bad is not None:
                slot, msg = bad
                problem(a.id, "functoriality", msg, FunctorialityViolation(a.id, slot, msg))
                break
    return diagnostics, invalid


def _slot_type_violation(o: Ontology, a: FunctionAnnotation, slots, ports):
    for spec, port in zip(slots, ports):
        if spec.type is None:
            continue
        abstract = o.abstract_type_by_name(a.language, spec.type)
        if abstract is not None and not o.leq(abstract, port):
            return spec.display, (
                f"slot {spec.display} has type {spec.type} = {type_label(abstract)}, "
                f"not a subtype of {type_label(port)}"
            )
    return None


def _expand_paths(paths) -> list:
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            out.extend(sorted(p.glob("*.json")))
        else:
            out.append(p)
    return out


def load_ontology(paths, strict: bool = True) -> Ontology:
    """Load and link ontology files; directories contribute their ``*.json``."""
    if isinstance(paths, (str, Path)):
        paths = [paths]
    documents = []
    for path in _expand_paths(paths):
        documents.extend(_read_documents(path))
    return build_ontology(documents, strict=strict)


def loads_ontology(text: str, strict: bool = True, source: str = "<string>") -> Ontology:
    return build_ontology(parse_documents(text, source), strict=strict)


# -- resolution ---------------------------------------------------------------


def resolve_annotation(ontology: Ontology, call: CallKey, lineage: Iterable = ()):
    """Find the annotation that applies to a concrete call, if any.

    Methods and accessors search the receiver's type lineage from the most
    specific class outward, so a subclass inherits its ancestors'
    annotations.  Plain functions and operators match on
    ``(language, package, name)``.
    """
    usable = [
        a
        for a in ontology.function_annotations.values()
        if a.id not in ontology.invalid and a.language == call.language
    ]
    if call.kind in METHOD_KINDS:
        named = [a for a in usable if a.kind == call.kind and a.function == call.name]
        for owner in lineage:
            hits = [a for a in named if a.owner_type == owner]
            if len(hits) > 1:
                raise AmbiguousAnnotation(
                    f"{call.name} on {owner}: {sorted(a.id for a in hits)}"
                )
            if hits:
                return hits[0]
        return None
    hits = [
        a
        for a in usable
        if a.kind not in METHOD_KINDS and a.package == call.package and a.function == call.name
    ]
    if len(hits) > 1:
        raise AmbiguousAnnotation(f"{call.package}.{call.name}: {sorted(a.id for a in hits)}")
    return hits[0] if hits else None


# -- validation ---------------------------------------------------------------


def validate_ontology(o: Ontology) -> list:
    """Re-check an ontology; diagnostics are returned, never raised."""
    out = []
    for cls in o.preorder.cycles():
        out.append(
            Diagnostic("info", "subtype-cycle", cls[0], "equivalent types: " + ", ".join(cls))
        )
    out.extend(d for d in o.diagnostics if d not in out)
    for f in sorted(o.functions.values(), key=lambda f: f.id):
        for g_id in f.is_a:
            g = o.functions[g_id]
            if not (o.leq(f.dom, g.dom) and o.leq(f.cod, g.cod)):
                out.append(
                    Diagnostic(
                        "error",
                        "subfunction-types",
                        f.id,
                        f"{f.id}: {type_label(f.dom)} -> {type_label(f.cod)} is not below "
                        f"{g_id}: {type_label(g.dom)} -> {type_label(g.cod)}",
                    )
                )
    rechecked = _check_definitions(o, strict=False)[0]
    out.extend(d for d in rechecked if d not in out)
    return out


def has_errors(diagnostics: Iterable) -> bool:
    return any(d.severity == "error" for d in diagnostics)


# -- serialization ------------------------------------------------------------


def _slot_json(s: SlotSpec) -> dict:
    out = {"slot": s.slot} if s.slot is not None else {"position": s.position}
    if s.mutated:
        out["mutated"] = True
    if s.type is not None:
        out["type"] = s.type
    return out


def _with_description(doc: dict, description) -> dict:
    if description is not None:
        doc["description"] = description
    return doc


def ontology_documents(o: Ontology) -> list:
    docs = []
    for t in sorted(o.types.values(), key=lambda t: t.id):
        docs.append(_with_description(
            {"schema": "concept", "kind": "type", "id": t.id, "is_a": list(t.is_a)}, t.description
        ))
    for f in sorted(o.functions.values(), key=lambda f: f.id):
        doc = {
            "schema": "concept",
            "kind": "function",
            "id": f.id,
            "dom": type_to_json(f.dom),
            "cod": type_to_json(f.cod),
            "is_a": list(f.is_a),
        }
        if f.definition is not None:
            doc["definition"] = term_to_json(f.definition)
        docs.append(_with_description(doc, f.description))
    for eq in o.equations:
        docs.append({
            "schema": "concept", "kind": "equation",
            "lhs": term_to_json(eq.lhs), "rhs": term_to_json(eq.rhs),
        })
    for a in sorted(o.type_annotations.values(), key=lambda a: a.id):
        docs.append(_with_description({
            "schema": "annotation", "kind": "type", "id": a.id,
            "language": a.language, "package": a.package,
            "concrete_name": a.concrete_name, "definition": type_to_json(a.definition),
        }, a.description))
    for a in sorted(o.function_annotations.values(), key=lambda a: a.id):
        doc = {
            "schema": "annotation", "kind": "function", "id": a.id,
            "language": a.language, "package": a.package, "function": a.function,
            "function_kind": a.kind, "definition": term_to_json(a.definition),
            "inputs": [_slot_json(s) for s in a.inputs],
            "outputs": [_slot_json(s) for s in a.outputs],
        }
        if a.owner_type is not None:
            doc["owner_type"] = a.owner_type
        docs.append(_with_description(doc, a.description))
    return docs


def serialize_ontology(o: Ontology) -> str:
    return dumps_json(ontology_documents(o))


def save_ontology(o: Ontology, path) -> None:
    Path(path).write_text(serialize_ontology(o), encoding="utf-8")


def diagnostics_to_json(diagnostics: Iterable) -> list:
    return [
        {"severity": d.severity, "code": d.code, "subject": d.subject, "message": d.message}
        for d in diagnostics
    ]


__all__ = [
    "CallKey",
    "build_ontology",
    "diagnostics_to_json",
    "has_errors",
    "load_ontology",
    "loads_ontology",
    "ontology_documents",
    "parse_documents",
    "resolve_annotation",
    "save_ontology",
    "serialize_ontology",
    "validate_ontology",
]
