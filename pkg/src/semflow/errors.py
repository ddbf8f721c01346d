"""Exception hierarchy shared by all semflow modules."""


class SemflowError(Exception):
    """Base class for every error raised by semflow."""


# Diagrams

class DiagramError(SemflowError):
    pass


class InvalidDiagram(DiagramError):
    pass


class ArityMismatch(DiagramError):
    pass


class TypeMismatch(DiagramError):
    def __init__(self, index, source, target):
        self.index = index
        self.source = source
        self.target = target
        super().__init__(f"port {index}: {source!r} is not a subtype of {target!r}")


class UnknownBox(DiagramError):
    pass


class EmptySubset(DiagramError):
    pass


class NonConvexSubset(DiagramError):
    pass


# Ontology language

class OntologyError(SemflowError):
    pass


class UnknownGenerator(OntologyError):
    pass


class UnknownFunctionConcept(OntologyError):
    pass


class CompositionTypeError(OntologyError):
    def __init__(self, position, message=""):
        self.position = position
        super().__init__(message or f"composition breaks at position {position}")


class IllTypedTerm(OntologyError):
    pass


class UnsupportedEquations(OntologyError):
    pass


# Loading concepts and annotations

class ParseError(SemflowError):
    def __init__(self, source, location, message=""):
        self.source = source
        self.location = location
        super().__init__(f"{source}:{location}: {message}" if message else f"{source}:{location}")


class UnresolvedReference(SemflowError):
    def __init__(self, ref, context=""):
        self.ref = ref
        super().__init__(f"unresolved reference {ref!r}" + (f" in {context}" if context else ""))


class DuplicateId(SemflowError):
    def __init__(self, ident):
        self.ident = ident
        super().__init__(f"duplicate id {ident!r}")


class FunctorialityViolation(SemflowError):
    def __init__(self, annotation, slot, message=""):
        self.annotation = annotation
        self.slot = slot
        super().__init__(f"annotation {annotation!r}, slot {slot!r}: {message}")


class AmbiguousAnnotation(SemflowError):
    pass


# Traces

class TraceError(SemflowError):
    pass


class UnknownEventKind(TraceError):
    pass


class NestingViolation(TraceError):
    pass


class DanglingReturn(NestingViolation):
    def __init__(self, call_id):
        self.call_id = call_id
        super().__init__(f"return from call {call_id!r} that never began")


# Enrichment

class EnrichmentError(SemflowError):
    pass


class SlotMismatch(EnrichmentError):
    def __init__(self, annotation, box, message=""):
        self.annotation = annotation
        self.box = box
        super().__init__(f"annotation {annotation!r} on box {box!r}: {message}")


class TypeConflict(EnrichmentError):
    def __init__(self, port, message=""):
        self.port = port
        super().__init__(f"type conflict at {port}: {message}")
