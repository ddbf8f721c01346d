"""Equality of morphism terms, decided by comparing canonical diagrams."""

from semflow.ontology import Basic, Compose, Copy, Generator, Identity, Product, terms_equal
from semflow.annotations import loads_ontology

ontology = loads_ontology("""[
  {"schema": "concept", "kind": "type", "id": "a"},
  {"schema": "concept", "kind": "type", "id": "b"},
  {"schema": "concept", "kind": "function", "id": "f", "dom": "a", "cod": "b"},
  {"schema": "concept", "kind": "function", "id": "g", "dom": "b", "cod": "b"}
]""")
f, g = Generator("f"), Generator("g")
a, b = Basic("a"), Basic("b")

cases = {
    "f;id = f": (Compose((f, Identity(b))), f),
    "(f x f);(g x g) = (f;g) x (f;g)": (
        Compose((Product((f, f)), Product((g, g)))),
        Product((Compose((f, g)), Compose((f, g)))),
    ),
    "copy;(f x f) = f;copy": (Compose((Copy(a), Product((f, f)))), Compose((f, Copy(b)))),
}
for text, (lhs, rhs) in cases.items():
    print(f"{text:36} {terms_equal(lhs, rhs, ontology)}")
