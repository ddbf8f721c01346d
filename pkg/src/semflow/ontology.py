"""Types, morphism terms, subtyping and subfunctions for an ontology.

An ontology is a finitely presented cartesian closed category with implicit
conversion.  Types are basic concepts, the unit, finite products and
function (hom) types; morphisms are written as terms built from function
concepts with composition, products and the cartesian structure maps.

Basic subtype and subfunction declarations generate preorders.  Subtyping
lifts structurally: products compare componentwise and hom types are
contravariant in the domain, covariant in the codomain.

Equality of terms in the free theory is decided by converting both to
wiring diagrams and testing isomorphism.  Curried terms become opaque boxes,
so the test is sound but incomplete in their presence.
"""

from __future__ import annotations

import hashlib
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

from . import diagram as wd
from .canonical import canonical_form, is_isomorphic
from .errors import (
    CompositionTypeError,
    IllTypedTerm,
    TypeMismatch,
    UnknownFunctionConcept,
    UnknownGenerator,
    UnsupportedEquations,
)

# -- types --------------------------------------------------------------------


@dataclass(frozen=True)
class Basic:
    id: str


@dataclass(frozen=True)
class Unit:
    pass


@dataclass(frozen=True)
class ProductType:
    items: tuple


@dataclass(frozen=True)
class Hom:
    dom: "ObType"
    cod: "ObType"


ObType = Union[Basic, Unit, ProductType, Hom]


def product_type(items: Iterable) -> ObType:
    """Normalized product: nested products flattened, unit factors dropped."""
    flat = []
    for t in items:
        if isinstance(t, ProductType):
            flat.extend(t.items)
        elif not isinstance(t, Unit):
            flat.append(t)
    if not flat:
        return Unit()
    if len(flat) == 1:
        return flat[0]
    return ProductType(tuple(flat))


def factors(t: ObType) -> tuple:
    """The ports a value of type ``t`` occupies in a diagram."""
    if isinstance(t, Unit):
        return ()
    if isinstance(t, ProductType):
        return t.items
    return (t,)


def type_label(t: ObType) -> str:
    if isinstance(t, Basic):
        return t.id
    if isinstance(t, Unit):
        return "()"
    if isinstance(t, ProductType):
        return "(" + "*".join(type_label(x) for x in t.items) + ")"
    return f"[{type_label(t.dom)},{type_label(t.cod)}]"


def parse_type_label(text: str) -> ObType:
    """Inverse of :func:`type_label`; raises ``ValueError`` on bad input."""
    pos = 0

    def parse():
        nonlocal pos
        if text.startswith("()", pos):
            pos += 2
            return Unit()
        if text[pos:pos + 1] == "(":
            pos += 1
            items = [parse()]
            while text[pos:pos + 1] == "*":
                pos += 1
                items.append(parse())
            expect(")")
            return product_type(items)
        if text[pos:pos + 1] == "[":
            pos += 1
            dom = parse()
            expect(",")
            cod = parse()
            expect("]")
            return Hom(dom, cod)
        start = pos
        while pos < len(text) and text[pos] not in "()[],*":
            pos += 1
        if pos == start:
            raise ValueError(f"expected a type at offset {pos} of {text!r}")
        return Basic(text[start:pos])

    def expect(ch):
        nonlocal pos
        if text[pos:pos + 1] != ch:
            raise ValueError(f"expected {ch!r} at offset {pos} of {text!r}")
        pos += 1

    t = parse()
    if pos != len(text):
        raise ValueError(f"trailing text at offset {pos} of {text!r}")
    return t


def basics_of(t: ObType) -> set:
    if isinstance(t, Basic):
        return {t.id}
    if isinstance(t, ProductType):
        return set().union(*(basics_of(x) for x in t.items))
    if isinstance(t, Hom):
        return basics_of(t.dom) | basics_of(t.cod)
    return set()


def is_concrete_label(label: str | None) -> bool:
    """Concrete (language-level) labels are namespaced as ``lang:...``."""
    return label is not None and ":" in label


# -- terms --------------------------------------------------------------------


@dataclass(frozen=True)
class Generator:
    id: str


@dataclass(frozen=True)
class Identity:
    type: ObType


@dataclass(frozen=True)
class Compose:
    terms: tuple


@dataclass(frozen=True)
class Product:
    terms: tuple


@dataclass(frozen=True)
class Braid:
    left: ObType
    right: ObType


@dataclass(frozen=True)
class Copy:
    type: ObType


@dataclass(frozen=True)
class Delete:
    type: ObType


@dataclass(frozen=True)
class Coerce:
    source: ObType
    target: ObType


@dataclass(frozen=True)
class Curry:
    """From ``term: W x X -> Y`` to ``W -> [X, Y]``."""

    term: "MorTerm"
    w: ObType
    x: ObType
    y: ObType


@dataclass(frozen=True)
class Uncurry:
    """From ``term: W -> [X, Y]`` to ``W x X -> Y``."""

    term: "MorTerm"
    w: ObType
    x: ObType
    y: ObType


MorTerm = Union[Generator, Identity, Compose, Product, Braid, Copy, Delete, Coerce, Curry, Uncurry]


def compose_terms(*terms) -> Compose:
    return Compose(tuple(terms))


def product_terms(*terms) -> Product:
    return Product(tuple(terms))


def generators_of(term) -> set:
    if isinstance(term, Generator):
        return {term.id}
    if isinstance(term, (Compose, Product)):
        return set().union(set(), *(generators_of(t) for t in term.terms))
    if isinstance(term, (Curry, Uncurry)):
        return generators_of(term.term)
    return set()


def types_of_term(term) -> set:
    """Basic type ids mentioned explicitly inside ``term``."""
    if isinstance(term, (Identity, Copy, Delete)):
        return basics_of(term.type)
    if isinstance(term, Braid):
        return basics_of(term.left) | basics_of(term.right)
    if isinstance(term, Coerce):
        return basics_of(term.source) | basics_of(term.target)
    if isinstance(term, (Compose, Product)):
        return set().union(set(), *(types_of_term(t) for t in term.terms))
    if isinstance(term, (Curry, Uncurry)):
        return types_of_term(term.term) | basics_of(term.w) | basics_of(term.x) | basics_of(term.y)
    return set()


# -- preorders ----------------------------------------------------------------


def _closure(pairs: Iterable, nodes: Iterable) -> dict:
    succ = {}
    for a, b in pairs:
        succ.setdefault(a, set()).add(b)
    up = {}
    for start in set(nodes) | set(succ):
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in succ.get(x, ()):
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        up[start] = frozenset(seen)
    return up


class SubtypePreorder:
    """Reflexive-transitive closure of basic subtype pairs, lifted to all types."""

    def __init__(self, generators: Iterable = (), basics: Iterable = ()):
        self.generators = frozenset(generators)
        self._up = _closure(self.generators, basics)
        self._label_cache = {}

    def basic_leq(self, a: str, b: str) -> bool:
        return a == b or b in self._up.get(a, ())

    def supertypes(self, a: str) -> frozenset:
        return self._up.get(a, frozenset({a}))

    def leq(self, s: ObType, t: ObType) -> bool:
        if isinstance(s, Basic) and isinstance(t, Basic):
            return self.basic_leq(s.id, t.id)
        if isinstance(s, Unit) and isinstance(t, Unit):
            return True
        if isinstance(s, ProductType) and isinstance(t, ProductType):
            return len(s.items) == len(t.items) and all(
                self.leq(a, b) for a, b in zip(s.items, t.items)
            )
        if isinstance(s, Hom) and isinstance(t, Hom):
            return self.leq(t.dom, s.dom) and self.leq(s.cod, t.cod)
        return False

    def label_leq(self, a: str, b: str) -> bool:
        """``leq`` on port labels; labels that do not parse compare by equality."""
        if a == b:
            return True
        key = (a, b)
        if key not in self._label_cache:
            try:
                self._label_cache[key] = self.leq(parse_type_label(a), parse_type_label(b))
            except ValueError:
                self._label_cache[key] = False
        return self._label_cache[key]

    def cycles(self) -> list:
        """Strongly connected classes with more than one member, sorted."""
        seen = set()
        classes = []
        for a in sorted(self._up):
            if a in seen:
                continue
            cls = sorted(b for b in self._up[a] if a in self._up.get(b, ()))
            seen.update(cls)
            if len(cls) > 1:
                classes.append(cls)
        return classes


def leq(s: ObType, t: ObType, preorder: SubtypePreorder) -> bool:
    return preorder.leq(s, t)


# -- typing -------------------------------------------------------------------


Signatures = Mapping[str, tuple]


def infer_type(term, signatures: Signatures, preorder: SubtypePreorder | None = None) -> tuple:
    """Return ``(dom, cod)`` of a term, checking composability along the way."""
    p = preorder or SubtypePreorder()
    if isinstance(term, Generator):
        if term.id not in signatures:
            raise UnknownGenerator(term.id)
        return signatures[term.id]
    if isinstance(term, Identity):
        return term.type, term.type
    if isinstance(term, Compose):
        if not term.terms:
            raise IllTypedTerm("empty composition")
        dom, cod = infer_type(term.terms[0], signatures, p)
        for i, t in enumerate(term.terms[1:], start=1):
            d2, c2 = infer_type(t, signatures, p)
            if not p.leq(cod, d2):
                raise CompositionTypeError(
                    i, f"step {i}: {type_label(cod)} is not a subtype of {type_label(d2)}"
                )
            cod = c2
        return dom, cod
    if isinstance(term, Product):
        types = [infer_type(t, signatures, p) for t in term.terms]
        return product_type(d for d, _ in types), product_type(c for _, c in types)
    if isinstance(term, Braid):
        return product_type([term.left, term.right]), product_type([term.right, term.left])
    if isinstance(term, Copy):
        return term.type, product_type([term.type, term.type])
    if isinstance(term, Delete):
        return term.type, Unit()
    if isinstance(term, Coerce):
        if not p.leq(term.source, term.target):
            raise IllTypedTerm(
                f"cannot coerce {type_label(term.source)} to {type_label(term.target)}"
            )
        return term.source, term.target
    if isinstance(term, Curry):
        dom, cod = infer_type(term.term, signatures, p)
        if not (p.leq(product_type([term.w, term.x]), dom) and p.leq(cod, term.y)):
            raise IllTypedTerm("curried term does not have type W x X -> Y")
        return term.w, Hom(term.x, term.y)
    if isinstance(term, Uncurry):
        dom, cod = infer_type(term.term, signatures, p)
        if not (p.leq(term.w, dom) and p.leq(cod, Hom(term.x, term.y))):
            raise IllTypedTerm("uncurried term does not have type W -> [X, Y]")
        return product_type([term.w, term.x]), term.y
    raise IllTypedTerm(f"not a term: {term!r}")


def _labels(t: ObType) -> tuple:
    return tuple(type_label(x) for x in factors(t))


def term_to_diagram(term, signatures: Signatures, preorder: SubtypePreorder | None = None):
    """Wiring diagram of a well-typed term.

    Copy and delete become fan-out, braids become crossed wires and
    coercions disappear into subtype-compatible wires.
    """
    p = preorder or SubtypePreorder()
    try:
        infer_type(term, signatures, p)
    except (CompositionTypeError, UnknownGenerator) as exc:
        raise IllTypedTerm(str(exc)) from exc
    return _to_diagram(term, signatures, p)


def _to_diagram(term, signatures, p):
    if isinstance(term, Generator):
        dom, cod = signatures[term.id]
        return wd.single_box(_labels(dom), _labels(cod), term.id)
    if isinstance(term, Identity):
        return wd.identity(_labels(term.type))
    if isinstance(term, Compose):
        parts = [_to_diagram(t, signatures, p) for t in term.terms]
        return wd.compose_all(parts, p.label_leq)
    if isinstance(term, Product):
        return wd.product_all(_to_diagram(t, signatures, p) for t in term.terms)
    if isinstance(term, Braid):
        left, right = _labels(term.left), _labels(term.right)
        n = len(left)
        wires = [wd.Wire(wd.outer_in(k), wd.outer_out(len(right) + k)) for k in range(n)]
        wires += [wd.Wire(wd.outer_in(n + k), wd.outer_out(k)) for k in range(len(right))]
        return wd.WiringDiagram(left + right, right + left, {}, wires)
    if isinstance(term, Copy):
        ts = _labels(term.type)
        n = len(ts)
        wires = [wd.Wire(wd.outer_in(k), wd.outer_out(k)) for k in range(n)]
        wires += [wd.Wire(wd.outer_in(k), wd.outer_out(n + k)) for k in range(n)]
        return wd.WiringDiagram(ts, ts + ts, {}, wires)
    if isinstance(term, Delete):
        return wd.WiringDiagram(_labels(term.type), (), {}, [])
    if isinstance(term, Coerce):
        src, tgt = _labels(term.source), _labels(term.target)
        wires = [wd.Wire(wd.outer_in(k), wd.outer_out(k)) for k in range(len(src))]
        return wd.WiringDiagram(src, tgt, {}, wires)
    if isinstance(term, (Curry, Uncurry)):
        dom, cod = infer_type(term, signatures, p)
        inner = _to_diagram(term.term, signatures, p)
        digest = hashlib.sha256(canonical_form(inner)).hexdigest()[:12]
        kind = "curry" if isinstance(term, Curry) else "uncurry"
        return wd.single_box(_labels(dom), _labels(cod), f"{kind}-{digest}")
    raise IllTypedTerm(f"not a term: {term!r}")


# -- ontology -----------------------------------------------------------------


@dataclass(frozen=True)
class TypeConcept:
    id: str
    is_a: tuple = ()
    description: str | None = None


@dataclass(frozen=True)
class FunctionConcept:
    id: str
    dom: ObType
    cod: ObType
    is_a: tuple = ()
    definition: object = None
    description: str | None = None


@dataclass(frozen=True)
class Equation:
    lhs: object
    rhs: object


@dataclass(frozen=True)
class TypeAnnotation:
    id: str
    language: str
    package: str
    concrete_name: str
    definition: ObType
    description: str | None = None

    @property
    def key(self) -> tuple:
        return (self.language, self.package, self.concrete_name)


@dataclass(frozen=True)
class SlotSpec:
    """Where a definition port gets its value: a named or positional slot."""

    slot: str | None = None
    position: int | None = None
    mutated: bool = False
    type: str | None = None

    @property
    def display(self) -> str:
        return self.slot if self.slot is not None else f"#{self.position}"


@dataclass(frozen=True)
class FunctionAnnotation:
    id: str
    language: str
    package: str
    function: str
    definition: object
    kind: str = "function"
    owner_type: str | None = None
    inputs: tuple = ()
    outputs: tuple = ()
    description: str | None = None


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.code}: {self.subject}: {self.message}"


@dataclass(frozen=True)
class Ontology:
    types: Mapping[str, TypeConcept] = field(default_factory=dict)
    functions: Mapping[str, FunctionConcept] = field(default_factory=dict)
    equations: tuple = ()
    type_annotations: Mapping[str, TypeAnnotation] = field(default_factory=dict)
    function_annotations: Mapping[str, FunctionAnnotation] = field(default_factory=dict)
    diagnostics: tuple = ()
    invalid: frozenset = frozenset()

    @cached_property
    def preorder(self) -> SubtypePreorder:
        pairs = [(t.id, s) for t in self.types.values() for s in t.is_a]
        return SubtypePreorder(pairs, self.types)

    @cached_property
    def signatures(self) -> dict:
        return {f.id: (f.dom, f.cod) for f in self.functions.values()}

    @cached_property
    def _subfunction_up(self) -> dict:
        pairs = [(f.id, g) for f in self.functions.values() for g in f.is_a]
        return _closure(pairs, self.functions)

    @cached_property
    def type_annotation_index(self) -> dict:
        return {a.key: a for a in self.type_annotations.values()}

    def object_types(self) -> list:
        return [Unit()] + [Basic(t) for t in sorted(self.types)]

    def leq(self, s: ObType, t: ObType) -> bool:
        return self.preorder.leq(s, t)

    def infer_type(self, term) -> tuple:
        return infer_type(term, self.signatures, self.preorder)

    def term_to_diagram(self, term):
        return term_to_diagram(term, self.signatures, self.preorder)

    def declared_subfunction(self, f: str, g: str) -> bool:
        return f == g or g in self._subfunction_up.get(f, ())

    def abstract_type(self, language: str, package: str, concrete_name: str):
        ann = self.type_annotation_index.get((language, package, concrete_name))
        return None if ann is None else ann.definition

    def abstract_type_by_name(self, language: str, concrete_name: str):
        """Look up a type annotation by language and ``package.Name`` style name."""
        for (lang, pkg, name), ann in self.type_annotation_index.items():
            if lang == language and concrete_name in (name, f"{pkg}.{name}", f"{pkg}::{name}"):
                return ann.definition
        return None


def check_subfunction(f_id: str, g_id: str, ontology: Ontology) -> bool:
    """Declared (reflexive-transitive) and type-compatible subfunction test."""
    for ident in (f_id, g_id):
        if ident not in ontology.functions:
            raise UnknownFunctionConcept(ident)
    if not ontology.declared_subfunction(f_id, g_id):
        return False
    f, g = ontology.functions[f_id], ontology.functions[g_id]
    return ontology.leq(f.dom, g.dom) and ontology.leq(f.cod, g.cod)


def check_submorphism(s, t, ontology: Ontology) -> bool:
    """Structural submorphism test between two terms of the same shape.

    Generators compare by :func:`check_subfunction`; composites and products
    compare componentwise.  Whole-term type side conditions are checked too.
    """
    sd, sc = ontology.infer_type(s)
    td, tc = ontology.infer_type(t)
    if not (ontology.leq(sd, td) and ontology.leq(sc, tc)):
        return False
    return _shape_leq(s, t, ontology)


def _shape_leq(s, t, ontology) -> bool:
    if isinstance(s, Generator) and isinstance(t, Generator):
        return check_subfunction(s.id, t.id, ontology)
    if isinstance(s, Identity) and isinstance(t, Identity):
        return ontology.leq(s.type, t.type)
    if isinstance(s, (Compose, Product)) and type(s) is type(t):
        return len(s.terms) == len(t.terms) and all(
            _shape_leq(a, b, ontology) for a, b in zip(s.terms, t.terms)
        )
    return s == t


def terms_equal(s, t, ontology: Ontology) -> bool:
    """Equality in the free theory, decided by diagram isomorphism."""
    if ontology.equations:
        raise UnsupportedEquations(
            f"{len(ontology.equations)} equations declared; only free ontologies are decidable here"
        )
    st, tt = ontology.infer_type(s), ontology.infer_type(t)
    if st != tt:
        raise TypeMismatch(
            "signature",
            f"{type_label(st[0])} -> {type_label(st[1])}",
            f"{type_label(tt[0])} -> {type_label(tt[1])}",
        )
    return is_isomorphic(ontology.term_to_diagram(s), ontology.term_to_diagram(t))


# -- JSON forms ---------------------------------------------------------------


def type_to_json(t: ObType):
    if isinstance(t, Basic):
        return t.id
    if isinstance(t, Unit):
        return {"unit": True}
    if isinstance(t, ProductType):
        return {"product": [type_to_json(x) for x in t.items]}
    return {"hom": {"dom": type_to_json(t.dom), "cod": type_to_json(t.cod)}}


def type_from_json(obj) -> ObType:
    if isinstance(obj, str):
        return Basic(obj)
    if isinstance(obj, dict) and len(obj) == 1:
        if obj.get("unit") is True:
            return Unit()
        if isinstance(obj.get("product"), list):
            return product_type(type_from_json(x) for x in obj["product"])
        if isinstance(obj.get("hom"), dict):
            return Hom(type_from_json(obj["hom"].get("dom")), type_from_json(obj["hom"].get("cod")))
    raise ValueError(f"not a type expression: {obj!r}")


def term_to_json(term):
    if isinstance(term, Generator):
        return {"generator": term.id}
    if isinstance(term, Identity):
        return {"id": type_to_json(term.type)}
    if isinstance(term, Compose):
        return {"compose": [term_to_json(t) for t in term.terms]}
    if isinstance(term, Product):
        return {"product": [term_to_json(t) for t in term.terms]}
    if isinstance(term, Braid):
        return {"braid": [type_to_json(term.left), type_to_json(term.right)]}
    if isinstance(term, Copy):
        return {"copy": type_to_json(term.type)}
    if isinstance(term, Delete):
        return {"delete": type_to_json(term.type)}
    if isinstance(term, Coerce):
        return {"coerce": [type_to_json(term.source), type_to_json(term.target)]}
    kind = "curry" if isinstance(term, Curry) else "uncurry"
    return {
        kind: {
            "term": term_to_json(term.term),
            "w": type_to_json(term.w),
            "x": type_to_json(term.x),
            "y": type_to_json(term.y),
        }
    }


def term_from_json(obj):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"not a term expression: {obj!r}")
    (kind, body), = obj.items()
    if kind == "generator" and isinstance(body, str):
        return Generator(body)
    if kind == "id":
        return Identity(type_from_json(body))
    if kind in ("compose", "product") and isinstance(body, list):
        terms = tuple(term_from_json(t) for t in body)
        return Compose(terms) if kind == "compose" else Product(terms)
    if kind == "braid" and isinstance(body, list) and len(body) == 2:
        return Braid(type_from_json(body[0]), type_from_json(body[1]))
    if kind == "copy":
        return Copy(type_from_json(body))
    if kind == "delete":
        return Delete(type_from_json(body))
    if kind == "coerce" and isinstance(body, list) and len(body) == 2:
        return Coerce(type_from_json(body[0]), type_from_json(body[1]))
    if kind in ("curry", "uncurry") and isinstance(body, dict):
        cls = Curry if kind == "curry" else Uncurry
        return cls(
            term_from_json(body.get("term")),
            type_from_json(body.get("w")),
            type_from_json(body.get("x")),
            type_from_json(body.get("y")),
        )
    raise ValueError(f"not a term expression: {obj!r}")
