"""Command-line front end: ``semflow validate|raw|enrich|iso``.

Exit codes: 0 success, 1 a semantic failure (invalid ontology, strict-mode
enrichment error, non-isomorphic inputs), 2 an I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .annotations import diagnostics_to_json, has_errors, load_ontology, validate_ontology
from .canonical import is_isomorphic
from .enrich import enrich, labeled_isomorphic
from .errors import (
    AmbiguousAnnotation,
    DuplicateId,
    EnrichmentError,
    FunctorialityViolation,
    IllTypedTerm,
    ParseError,
    SemflowError,
    TraceError,
    UnresolvedReference,
)
from .serialize import (
    diagram_from_dict,
    diagram_to_dot,
    diagram_to_json,
    dumps_json,
    looks_like_diagram,
    parse_json_text,
)
from .trace import build_raw_graph, parse_trace

ENV_ONTOLOGY_PATH = "SEMFLOW_ONTOLOGY_PATH"
EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


@dataclass
class CliConfig:
    ontology: list = field(default_factory=list)
    inputs: list = field(default_factory=list)
    out: str | None = None
    format: str = "json"
    strict: bool = False
    labeled_only: bool = False


def ontology_paths(explicit) -> list:
    if explicit:
        return list(explicit)
    env = os.environ.get(ENV_ONTOLOGY_PATH, "")
    return [p for p in env.split(os.pathsep) if p]


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _render(d, fmt: str) -> str:
    return diagram_to_dot(d) if fmt == "dot" else diagram_to_json(d)


def _error(msg: str) -> None:
    print(f"semflow: {msg}", file=sys.stderr)


def read_diagram_or_trace(path: str):
    """A diagram JSON file, or a trace whose raw graph is built on the fly."""
    text = _read_text(path)
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError:
            obj = None
        if looks_like_diagram(obj):
            return diagram_from_dict(obj, path)
    return build_raw_graph(parse_trace(text, path))


def read_diagram(path: str):
    obj = parse_json_text(_read_text(path), path)
    if not looks_like_diagram(obj):
        raise ParseError(path, "$", "not a diagram document")
    return diagram_from_dict(obj, path)


def cmd_validate(cfg: CliConfig) -> int:
    paths = ontology_paths(cfg.ontology)
    if not paths:
        _error("no ontology files given (use --ontology or SEMFLOW_ONTOLOGY_PATH)")
        return EXIT_IO
    try:
        o = load_ontology(paths, strict=cfg.strict)
    except (OSError, ParseError) as exc:
        _error(str(exc))
        return EXIT_IO
    except (DuplicateId, UnresolvedReference, FunctorialityViolation, IllTypedTerm) as exc:
        _error(str(exc))
        return EXIT_FAIL
    diagnostics = validate_ontology(o)
    for d in diagnostics:
        print(d)
    summary = {
        "types": len(o.types),
        "functions": len(o.functions),
        "type_annotations": len(o.type_annotations),
        "function_annotations": len(o.function_annotations),
        "diagnostics": diagnostics_to_json(diagnostics),
    }
    if cfg.out:
        _emit(dumps_json(summary), cfg.out)
    return EXIT_FAIL if has_errors(diagnostics) else EXIT_OK


def cmd_raw(cfg: CliConfig) -> int:
    path = cfg.inputs[0]
    try:
        d = build_raw_graph(parse_trace(_read_text(path), path))
    except (OSError, ParseError, TraceError) as exc:
        _error(str(exc))
        return EXIT_IO
    _emit(_render(d, cfg.format), cfg.out)
    return EXIT_OK


def cmd_enrich(cfg: CliConfig) -> int:
    path = cfg.inputs[0]
    paths = ontology_paths(cfg.ontology)
    if not paths:
        _error("no ontology files given (use --ontology or SEMFLOW_ONTOLOGY_PATH)")
        return EXIT_IO
    try:
        raw = read_diagram_or_trace(path)
        o = load_ontology(paths, strict=cfg.strict)
    except (OSError, ParseError, TraceError) as exc:
        _error(str(exc))
        return EXIT_IO
    except SemflowError as exc:
        _error(str(exc))
        return EXIT_FAIL
    try:
        d, report = enrich(raw, o, strict=cfg.strict)
    except (EnrichmentError, AmbiguousAnnotation) as exc:
        _error(str(exc))
        return EXIT_FAIL
    sys.stderr.write(dumps_json(report.to_dict()))
    _emit(_render(d, cfg.format), cfg.out)
    return EXIT_OK


def cmd_iso(cfg: CliConfig) -> int:
    a_path, b_path = cfg.inputs
    try:
        a, b = read_diagram(a_path), read_diagram(b_path)
    except (OSError, ParseError) as exc:
        _error(str(exc))
        return EXIT_IO
    same = labeled_isomorphic(a, b) if cfg.labeled_only else is_isomorphic(a, b)
    print("isomorphic" if same else "not isomorphic")
    return EXIT_OK if same else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semflow", description="Raw and semantic flow graphs from execution traces."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, inputs: int | None, fmt: bool = False):
        p.add_argument("--ontology", action="append", default=[], metavar="PATH",
                       help="ontology file or directory; repeatable")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--strict", action="store_true")
        if fmt:
            p.add_argument("--format", choices=("json", "dot"), default="json")
        if inputs:
            p.add_argument("inputs", nargs=inputs, metavar="PATH")

    validate = sub.add_parser("validate", help="load and check ontology files")
    common(validate, None)
    validate.add_argument("paths", nargs="*", metavar="PATH", help="more ontology files")
    common(sub.add_parser("raw", help="build the raw flow graph of a trace"), 1, fmt=True)
    common(sub.add_parser("enrich", help="semantic flow graph of a trace or raw diagram"), 1, fmt=True)
    iso = sub.add_parser("iso", help="test two diagrams for isomorphism")
    common(iso, 2)
    iso.add_argument("--labeled-only", action="store_true")
    return parser


COMMANDS = {"validate": cmd_validate, "raw": cmd_raw, "enrich": cmd_enrich, "iso": cmd_iso}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = CliConfig(
        ontology=args.ontology + getattr(args, "paths", []),
        inputs=getattr(args, "inputs", None) or [],
        out=args.out,
        format=getattr(args, "format", "json"),
        strict=args.strict,
        labeled_only=getattr(args, "labeled_only", False),
    )
    try:
        return COMMANDS[args.command](cfg)
    except OSError as exc:
        _error(str(exc))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
