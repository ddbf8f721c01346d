"""Execution traces and the raw flow graphs built from them.

A trace is line-delimited JSON.  An optional first line ``{"trace_version": 1}``
names the format version; every other line is one event, discriminated by
its ``"event"`` field:

``call-begin``
    ``call_id``, ``function`` (``language``, ``package``, ``name``, optional
    ``kind`` and ``owner``), ``user_defined``, ``args`` and optionally
    ``receiver`` for method calls.  Each argument carries ``slot``,
    ``object_id`` (null for values without identity), ``type``, ``value``
    and, where known, where the value came from: ``var`` (a variable name)
    or ``from_call`` plus ``index`` (the index-th return of an earlier call).
    A receiver may list its class ``lineage``, most specific first.
``call-return``
    ``call_id``, ``returns`` (``object_id``, ``type``, ``value``) and
    ``mutated`` (object ids of arguments the call changed).
``access``
    ``name`` and ``object_id`` of a variable that was read.
``assign``
    ``name``, ``object_id`` and optionally ``from_call``/``index`` or
    ``from_var`` for the assigned value.
``delete``
    ``name`` of a variable that went away.

Building the raw graph is a fold over these events that keeps one diagram
under construction per open user-defined call, plus per-frame tables from
variable names and object ids to the wire currently carrying that value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from . import diagram as wd
from .diagram import Box, ElementValue, Endpoint, Wire, WiringDiagram
from .errors import DanglingReturn, NestingViolation, ParseError, UnknownEventKind

TRACE_VERSION = 1
EVENT_KINDS = ("call-begin", "call-return", "access", "assign", "delete")
CALL_KINDS = ("function", "method", "getter", "setter", "operator")

# -- events -------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionKey:
    language: str
    package: str
    name: str
    kind: str = "function"
    owner: str | None = None

    @property
    def qualname(self) -> str:
        if self.owner and self.kind in ("method", "getter", "setter"):
            return f"{self.owner.rsplit('.', 1)[-1]}.{self.name}"
        return self.name

    @property
    def label(self) -> str:
        return f"{self.language}:{self.package}:{self.qualname}"


@dataclass(frozen=True)
class Arg:
    slot: str | None = None
    object_id: str | None = None
    type: str | None = None
    value: str | None = None
    var: str | None = None
    from_call: str | None = None
    index: int = 0
    lineage: tuple = ()


@dataclass(frozen=True)
class Returned:
    object_id: str | None = None
    type: str | None = None
    value: str | None = None


@dataclass(frozen=True)
class CallBegin:
    call_id: str
    function: FunctionKey
    args: tuple = ()
    user_defined: bool = False
    receiver: Arg | None = None


@dataclass(frozen=True)
class CallReturn:
    call_id: str
    returns: tuple = ()
    mutated: tuple = ()


@dataclass(frozen=True)
class Access:
    name: str
    object_id: str | None = None


@dataclass(frozen=True)
class Assign:
    name: str
    object_id: str | None = None
    from_call: str | None = None
    index: int = 0
    from_var: str | None = None


@dataclass(frozen=True)
class Delete:
    name: str


# -- parsing ------------------------------------------------------------------


class _LineReader:
    def __init__(self, source: str, line: int):
        self.source, self.line = source, line

    def fail(self, message):
        raise ParseError(self.source, self.line, message)

    def get(self, obj, key, kinds, required=False, default=None):
        if key not in obj or obj[key] is None:
            if required:
                self.fail(f"missing field {key!r}")
            return default
        value = obj[key]
        if not isinstance(value, kinds) or (isinstance(value, bool) and bool not in _tuple(kinds)):
            self.fail(f"field {key!r} has the wrong type")
        return value

    def text_or_id(self, obj, key, required=False):
        value = self.get(obj, key, (str, int), required)
        return None if value is None else str(value)

    def arg(self, obj) -> Arg:
        if not isinstance(obj, dict):
            self.fail("argument must be an object")
        lineage = self.get(obj, "lineage", list, default=[])
        if not all(isinstance(x, str) for x in lineage):
            self.fail("lineage must be a list of type names")
        return Arg(
            slot=self.text_or_id(obj, "slot"),
            object_id=self.text_or_id(obj, "object_id"),
            type=self.get(obj, "type", str),
            value=_repr_text(obj.get("value")),
            var=self.get(obj, "var", str),
            from_call=self.text_or_id(obj, "from_call"),
            index=self.get(obj, "index", int, default=0),
            lineage=tuple(lineage),
        )

    def event(self, obj):
        kind = obj.get("event")
        if kind not in EVENT_KINDS:
            raise UnknownEventKind(f"{self.source}:{self.line}: unknown event kind {kind!r}")
        if kind == "call-begin":
            fn = self.get(obj, "function", dict, required=True)
            fkind = self.get(fn, "kind", str, default="function")
            if fkind not in CALL_KINDS:
                self.fail(f"unknown function kind {fkind!r}")
            key = FunctionKey(
                self.get(fn, "language", str, required=True),
                self.get(fn, "package", str, default=""),
                self.get(fn, "name", str, required=True),
                fkind,
                self.get(fn, "owner", str),
            )
            receiver = obj.get("receiver")
            return CallBegin(
                self.text_or_id(obj, "call_id", required=True),
                key,
                tuple(self.arg(a) for a in self.get(obj, "args", list, default=[])),
                self.get(obj, "user_defined", bool, default=False),
                None if receiver is None else self.arg(receiver),
            )
        if kind == "call-return":
            returns = []
            for r in self.get(obj, "returns", list, default=[]):
                if not isinstance(r, dict):
                    self.fail("return payload must be an object")
                returns.append(
                    Returned(self.text_or_id(r, "object_id"), self.get(r, "type", str), _repr_text(r.get("value")))
                )
            mutated = self.get(obj, "mutated", list, default=[])
            return CallReturn(
                self.text_or_id(obj, "call_id", required=True),
                tuple(returns),
                tuple(str(m) for m in mutated),
            )
        if kind == "access":
            return Access(self.get(obj, "name", str, required=True), self.text_or_id(obj, "object_id"))
        if kind == "assign":
            return Assign(
                self.get(obj, "name", str, required=True),
                self.text_or_id(obj, "object_id"),
                self.text_or_id(obj, "from_call"),
                self.get(obj, "index", int, default=0),
                self.get(obj, "from_var", str),
            )
        return Delete(self.get(obj, "name", str, required=True))


def _tuple(kinds):
    return kinds if isinstance(kinds, tuple) else (kinds,)


def _repr_text(value):
    if value is None or isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True)


def parse_trace(stream, source: str = "<trace>") -> list:
    """Parse trace lines into events, checking call nesting."""
    if isinstance(stream, str):
        stream = stream.splitlines()
    events = []
    open_calls = []
    started = set()
    first = True
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(source, lineno, exc.msg) from None
        if not isinstance(obj, dict):
            raise ParseError(source, lineno, "event must be a JSON object")
        if first and "trace_version" in obj:
            first = False
            if obj["trace_version"] != TRACE_VERSION or len(obj) != 1:
                raise ParseError(source, lineno, f"unsupported trace header {obj!r}")
            continue
        first = False
        event = _LineReader(source, lineno).event(obj)
        if isinstance(event, CallBegin):
            if event.call_id in started:
                raise NestingViolation(f"{source}:{lineno}: call {event.call_id!r} began twice")
            started.add(event.call_id)
            open_calls.append(event.call_id)
        elif isinstance(event, CallReturn):
            if event.call_id not in started:
                raise DanglingReturn(event.call_id)
            if not open_calls or open_calls[-1] != event.call_id:
                raise NestingViolation(
                    f"{source}:{lineno}: return from {event.call_id!r} while "
                    f"{open_calls[-1] if open_calls else None!r} is innermost"
                )
            open_calls.pop()
        events.append(event)
    if open_calls:
        raise NestingViolation(f"{source}: calls never returned: {open_calls}")
    return events


def load_trace(path) -> list:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(str(path), f"byte {exc.start}", "not valid UTF-8") from None
    return parse_trace(text, str(path))


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None and v != [] and v != ()}


def _arg_dict(a: Arg) -> dict:
    out = _drop_none({
        "slot": a.slot, "object_id": a.object_id, "type": a.type, "value": a.value,
        "var": a.var, "from_call": a.from_call, "lineage": list(a.lineage),
    })
    if a.from_call is not None:
        out["index"] = a.index
    return out


def event_to_dict(e) -> dict:
    if isinstance(e, CallBegin):
        out = {
            "event": "call-begin",
            "call_id": e.call_id,
            "function": _drop_none({
                "language": e.function.language, "package": e.function.package,
                "name": e.function.name, "kind": e.function.kind, "owner": e.function.owner,
            }),
            "user_defined": e.user_defined,
            "args": [_arg_dict(a) for a in e.args],
        }
        if e.receiver is not None:
            out["receiver"] = _arg_dict(e.receiver)
        return out
    if isinstance(e, CallReturn):
        return {
            "event": "call-return",
            "call_id": e.call_id,
            "returns": [_drop_none({"object_id": r.object_id, "type": r.type, "value": r.value}) for r in e.returns],
            "mutated": list(e.mutated),
        }
    if isinstance(e, Access):
        return _drop_none({"event": "access", "name": e.name, "object_id": e.object_id})
    if isinstance(e, Assign):
        out = _drop_none({
            "event": "assign", "name": e.name, "object_id": e.object_id,
            "from_call": e.from_call, "from_var": e.from_var,
        })
        if e.from_call is not None:
            out["index"] = e.index
        return out
    return {"event": "delete", "name": e.name}


def dump_trace(events: Iterable) -> str:
    lines = [json.dumps({"trace_version": TRACE_VERSION})]
    lines += [json.dumps(event_to_dict(e), sort_keys=True) for e in events]
    return "\n".join(lines) + "\n"


# -- method homogenization ----------------------------------------------------

PY_OPERATOR_SYMBOLS = {
    "+": "add", "-": "sub", "*": "mul", "/": "truediv", "//": "floordiv", "%": "mod",
    "**": "pow", "@": "matmul", "==": "eq", "!=": "ne", "<": "lt", "<=": "le",
    ">": "gt", ">=": "ge", "&": "and_", "|": "or_", "^": "xor", "~": "invert",
    "+=": "iadd", "-=": "isub", "*=": "imul", "/=": "itruediv", "[]": "getitem",
    "[]=": "setitem", "del[]": "delitem", "unary-": "neg", "not": "not_",
}
_DUNDER_ALIASES = {"and": "and_", "or": "or_", "not": "not_"}
MUTATING_OPERATORS = {"setitem", "delitem", "setattr"}


def _as_self(a: Arg) -> Arg:
    return replace(a, slot="self")


def method_homogenize(event):
    """Reduce methods, attribute access and operators to plain function calls.

    Methods take their receiver as a leading ``self`` argument.  Python's
    ``getattr``/``setattr`` and R's ``$``/``@`` become getter and setter calls
    named after the attribute.  Python operators and special methods become
    calls to their ``operator`` module alias.  Applying it twice changes
    nothing more.
    """
    if not isinstance(event, CallBegin):
        return event
    fn, args = event.function, event.args
    if event.receiver is not None:
        args = (_as_self(event.receiver),) + args
        kind = fn.kind if fn.kind != "function" else "method"
        fn = replace(fn, kind=kind)
        event = replace(event, args=args, receiver=None, function=fn)

    lang = fn.language
    if lang == "python" and fn.package == "builtins" and fn.name in ("getattr", "setattr") and len(args) >= 2:
        getter = fn.name == "getattr"
        rest = () if getter else tuple(replace(a, slot="value") for a in args[2:3])
        owner = args[0].lineage[0] if args[0].lineage else fn.owner
        fn = FunctionKey(lang, fn.package, str(args[1].value), "getter" if getter else "setter", owner)
        return replace(event, function=fn, args=(_as_self(args[0]),) + rest)
    if lang == "r" and fn.name in ("$", "@", "$<-", "@<-") and len(args) >= 2:
        getter = not fn.name.endswith("<-")
        rest = () if getter else tuple(replace(a, slot="value") for a in args[2:3])
        owner = args[0].lineage[0] if args[0].lineage else fn.owner
        fn = FunctionKey(lang, fn.package, str(args[1].value), "getter" if getter else "setter", owner)
        return replace(event, function=fn, args=(_as_self(args[0]),) + rest)
    if lang == "python":
        alias = None
        if fn.name in PY_OPERATOR_SYMBOLS:
            alias = PY_OPERATOR_SYMBOLS[fn.name]
        elif fn.name.startswith("__") and fn.name.endswith("__") and len(fn.name) > 4:
            stem = fn.name[2:-2]
            alias = _DUNDER_ALIASES.get(stem, stem)
        if alias is not None and alias != "init":
            fn = FunctionKey(lang, "operator", alias, "operator", None)
            return replace(event, function=fn)
    return event


# -- raw graph construction ---------------------------------------------------


@dataclass
class _Draft:
    label: str
    name: str
    call_kind: str
    lineage: tuple
    input_types: list = field(default_factory=list)
    input_sources: list = field(default_factory=list)
    input_slots: list = field(default_factory=list)
    output_types: list = field(default_factory=list)
    output_slots: list = field(default_factory=list)
    inner: WiringDiagram | None = None


@dataclass
class Frame:
    """One diagram under construction, mirroring one open user-defined call."""

    call: CallBegin | None = None
    parent: "Frame | None" = None
    box_in_parent: str | None = None
    inputs: list = field(default_factory=list)
    drafts: dict = field(default_factory=dict)
    elements: dict = field(default_factory=dict)
    variables: dict = field(default_factory=dict)
    objects: dict = field(default_factory=dict)
    call_outputs: dict = field(default_factory=dict)
    open_atomic: list = field(default_factory=list)

    def new_box_id(self) -> str:
        return f"b{len(self.drafts)}"

    def boxes(self) -> dict:
        out = {}
        for b, d in self.drafts.items():
            out[b] = Box(
                tuple(d.input_types), tuple(d.output_types), d.label, d.name, d.inner,
                input_slots=tuple(d.input_slots), output_slots=tuple(d.output_slots),
                call_kind=d.call_kind, lineage=d.lineage,
            )
        return out

    def wires(self) -> list:
        return [
            Wire(src, wd.box_in(b, k))
            for b, d in self.drafts.items()
            for k, src in enumerate(d.input_sources)
        ]


def _port_type(language: str, concrete: str | None):
    return None if concrete is None else f"{language}:{concrete}"


class RawGraphBuilder:
    """Fold trace events into a raw flow graph.

    Arguments are wired from the most recent source of the same object,
    else from the named return of an earlier call, else from the variable
    they were read through.  Anything else is a value from outside the
    trace: it arrives on a fresh outer input, threaded through every
    enclosing user-defined call.
    """

    def __init__(self):
        self.top = Frame()
        self.stack = [self.top]
        self.language = None

    @property
    def frame(self) -> Frame:
        return self.stack[-1]

    # sources

    def _lookup(self, frame: Frame, object_id, from_call, index, var):
        if object_id is not None and object_id in frame.objects:
            return frame.objects[object_id]
        if from_call is not None and from_call in frame.call_outputs:
            outs = frame.call_outputs[from_call]
            if 0 <= index < len(outs):
                return outs[index]
        if var is not None and var in frame.variables:
            return frame.variables[var]
        return None

    def _resolve(self, frame: Frame, arg: Arg, language: str) -> Endpoint:
        src = self._lookup(frame, arg.object_id, arg.from_call, arg.index, arg.var)
        if src is not None:
            return src
        ptype = _port_type(language, arg.type)
        if frame.parent is None:
            src = wd.outer_in(len(frame.inputs))
        else:
            outer = self._resolve(frame.parent, arg, language)
            draft = frame.parent.drafts[frame.box_in_parent]
            draft.input_types.append(ptype)
            draft.input_sources.append(outer)
            draft.input_slots.append(arg.var or arg.slot or "")
            src = wd.outer_in(len(frame.inputs))
        frame.inputs.append(ptype)
        frame.elements[src] = ElementValue(arg.object_id, arg.value, arg.type)
        if arg.object_id is not None:
            frame.objects[arg.object_id] = src
        return src

    # events

    def feed(self, event) -> None:
        if isinstance(event, CallBegin):
            self._begin(method_homogenize(event))
        elif isinstance(event, CallReturn):
            self._return(event)
        elif isinstance(event, Access):
            self._access(event)
        elif isinstance(event, Assign):
            self._assign(event)
        elif isinstance(event, Delete):
            self.frame.variables.pop(event.name, None)
        else:
            raise UnknownEventKind(repr(event))

    def _begin(self, event: CallBegin) -> None:
        frame = self.frame
        fn = event.function
        lineage = event.args[0].lineage if event.args and fn.kind in ("method", "getter", "setter") else ()
        draft = _Draft(fn.label, fn.qualname, fn.kind, lineage)
        for pos, arg in enumerate(event.args):
            draft.input_types.append(_port_type(fn.language, arg.type))
            draft.input_sources.append(self._resolve(frame, arg, fn.language))
            draft.input_slots.append(arg.slot if arg.slot is not None else str(pos))
        box_id = frame.new_box_id()
        frame.drafts[box_id] = draft
        if event.user_defined:
            child = Frame(call=event, parent=frame, box_in_parent=box_id)
            for k, arg in enumerate(event.args):
                src = wd.outer_in(k)
                child.inputs.append(draft.input_types[k])
                child.elements[src] = ElementValue(arg.object_id, arg.value, arg.type)
                if arg.object_id is not None:
                    child.objects[arg.object_id] = src
                if arg.slot is not None:
                    child.variables[arg.slot] = src
            self.stack.append(child)
        else:
            frame.open_atomic.append((event, box_id))

    def _return(self, event: CallReturn) -> None:
        frame = self.frame
        if frame.open_atomic:
            begin, box_id = frame.open_atomic.pop()
            if begin.call_id != event.call_id:
                raise NestingViolation(f"return from {event.call_id!r} inside {begin.call_id!r}")
            self._finish(frame, begin, box_id, event, None)
            return
        if frame.call is None:
            raise DanglingReturn(event.call_id)
        if frame.call.call_id != event.call_id:
            raise NestingViolation(f"return from {event.call_id!r} inside {frame.call.call_id!r}")
        self.stack.pop()
        self._finish(frame.parent, frame.call, frame.box_in_parent, event, frame)

    def _finish(self, frame: Frame, begin: CallBegin, box_id: str, ret: CallReturn, child):
        fn = begin.function
        draft = frame.drafts[box_id]
        mutated = set(ret.mutated)
        if fn.name in MUTATING_OPERATORS or fn.kind == "setter":
            if begin.args and begin.args[0].object_id is not None:
                mutated.add(begin.args[0].object_id)
        mutated_args = [
            (k, a) for k, a in enumerate(begin.args) if a.object_id is not None and a.object_id in mutated
        ]
        # One output per distinct object: returns first, then mutated inputs.
        outputs = []  # (object_id, type, value, slot name)
        seen = {}
        return_ports = []
        for i, r in enumerate(ret.returns):
            slot = "return" if len(ret.returns) == 1 else f"return.{i}"
            if r.object_id is not None and r.object_id in seen:
                return_ports.append(seen[r.object_id])
                continue
            if r.object_id is not None:
                seen[r.object_id] = len(outputs)
            return_ports.append(len(outputs))
            outputs.append([r.object_id, r.type, r.value, slot])
        for k, a in mutated_args:
            if a.object_id in seen:
                outputs[seen[a.object_id]][3] = draft.input_slots[k]
                continue
            seen[a.object_id] = len(outputs)
            outputs.append([a.object_id, a.type, a.value, draft.input_slots[k]])

        if child is not None:
            inner_wires = child.wires()
            for j, (oid, otype, _, _) in enumerate(outputs):
                src = child.objects.get(oid) if oid is not None else None
                if src is None:
                    src = self._resolve(child, Arg(object_id=oid, type=otype), fn.language)
                inner_wires.append(Wire(src, wd.outer_out(j)))
            draft.inner = WiringDiagram(
                tuple(child.inputs),
                tuple(_port_type(fn.language, o[1]) for o in outputs),
                child.boxes(),
                inner_wires,
                child.elements,
            )
        draft.output_types = [_port_type(fn.language, o[1]) for o in outputs]
        draft.output_slots = [o[3] for o in outputs]

        ends = []
        for j, (oid, otype, value, _) in enumerate(outputs):
            ep = wd.box_out(box_id, j)
            ends.append(ep)
            frame.elements[ep] = ElementValue(oid, value, otype)
        for k, a in mutated_args:
            new = ends[seen[a.object_id]]
            old = draft.input_sources[k]
            for name, src in list(frame.variables.items()):
                if src == old:
                    frame.variables[name] = new
        for (oid, _, _, _), ep in zip(outputs, ends):
            if oid is not None:
                frame.objects[oid] = ep
        frame.call_outputs[begin.call_id] = [ends[j] for j in return_ports]

    def _access(self, event: Access) -> None:
        frame = self.frame
        if event.object_id is None:
            return
        if event.object_id not in frame.objects and event.name in frame.variables:
            frame.objects[event.object_id] = frame.variables[event.name]

    def _assign(self, event: Assign) -> None:
        frame = self.frame
        src = self._lookup(frame, event.object_id, event.from_call, event.index, event.from_var)
        if src is None:
            frame.variables.pop(event.name, None)
            return
        frame.variables[event.name] = src
        if event.object_id is not None and event.object_id not in frame.objects:
            frame.objects[event.object_id] = src

    # result

    def diagram(self) -> WiringDiagram:
        if len(self.stack) != 1 or self.top.open_atomic:
            raise NestingViolation("trace ended with calls still open")
        frame = self.top
        wires = frame.wires()
        consumed = {w.src for w in wires}
        outputs = []
        for b, d in frame.drafts.items():
            for j, t in enumerate(d.output_types):
                ep = wd.box_out(b, j)
                if ep not in consumed:
                    wires.append(Wire(ep, wd.outer_out(len(outputs))))
                    outputs.append(t)
        return WiringDiagram(tuple(frame.inputs), tuple(outputs), frame.boxes(), wires, frame.elements)


def build_raw_graph(events: Iterable) -> WiringDiagram:
    """Raw flow graph of a parsed trace."""
    builder = RawGraphBuilder()
    for e in events:
        builder.feed(e)
    return builder.diagram()


def call_counts(events: Iterable) -> dict:
    """Numbers of call pairs, atomic and user-defined, and other events."""
    events = list(events)
    begins = [e for e in events if isinstance(e, CallBegin)]
    return {
        "calls": len(begins),
        "atomic": sum(not e.user_defined for e in begins),
        "user_defined": sum(e.user_defined for e in begins),
        "access": sum(isinstance(e, Access) for e in events),
        "assign": sum(isinstance(e, Assign) for e in events),
        "delete": sum(isinstance(e, Delete) for e in events),
    }


def max_user_depth(events: Iterable) -> int:
    depth = best = 0
    user = {}
    for e in events:
        if isinstance(e, CallBegin):
            user[e.call_id] = e.user_defined
            if e.user_defined:
                depth += 1
                best = max(best, depth)
        elif isinstance(e, CallReturn) and user.get(e.call_id):
            depth -= 1
    return best


__all__ = [
    "Access",
    "Arg",
    "Assign",
    "CallBegin",
    "CallReturn",
    "Delete",
    "Frame",
    "FunctionKey",
    "RawGraphBuilder",
    "Returned",
    "build_raw_graph",
    "call_counts",
    "dump_trace",
    "event_to_dict",
    "load_trace",
    "max_user_depth",
    "method_homogenize",
    "parse_trace",
]
