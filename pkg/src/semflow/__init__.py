"""Raw and semantic flow graphs from execution traces.

The pipeline: parse a trace (:mod:`semflow.trace`), build its raw flow graph,
load an ontology (:mod:`semflow.annotations`), then enrich the graph
(:mod:`semflow.enrich`).  Graphs are wiring diagrams (:mod:`semflow.diagram`)
compared up to isomorphism by canonical forms (:mod:`semflow.canonical`).
"""

from .annotations import CallKey, load_ontology, resolve_annotation, serialize_ontology, validate_ontology
from .canonical import canonical_form, canonicalize, is_isomorphic
from .diagram import (
    Box,
    ElementValue,
    Endpoint,
    Wire,
    WiringDiagram,
    compose,
    encapsulate,
    flatten,
    identity,
    product,
    substitute,
)
from .enrich import EnrichmentReport, contract, enrich, expand, labeled_isomorphic
from .ontology import Ontology, SubtypePreorder, check_subfunction, infer_type, term_to_diagram, terms_equal
from .serialize import diagram_from_json, diagram_to_dot, diagram_to_json, load_diagram
from .trace import build_raw_graph, method_homogenize, parse_trace

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CallKey",
    "ElementValue",
    "EnrichmentReport",
    "Endpoint",
    "Ontology",
    "SubtypePreorder",
    "Wire",
    "WiringDiagram",
    "build_raw_graph",
    "canonical_form",
    "canonicalize",
    "check_subfunction",
    "compose",
    "contract",
    "diagram_from_json",
    "diagram_to_dot",
    "diagram_to_json",
    "encapsulate",
    "enrich",
    "expand",
    "flatten",
    "identity",
    "infer_type",
    "is_isomorphic",
    "labeled_isomorphic",
    "load_diagram",
    "load_ontology",
    "method_homogenize",
    "parse_trace",
    "product",
    "resolve_annotation",
    "serialize_ontology",
    "substitute",
    "term_to_diagram",
    "terms_equal",
    "validate_ontology",
]
