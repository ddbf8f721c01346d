"""Canonical forms and isomorphism testing for wiring diagrams.

The diagram is first viewed as a vertex-labeled multigraph with port-indexed
edges (:class:`PortGraph`).  Color refinement partitions the vertices by
label and neighborhood; when the partition stalls with non-singleton cells,
individualization-refinement branches on each member of the first such cell.
Every leaf of the search tree orders the vertices completely and yields an
encoding; the smallest encoding is the canonical form.  Automorphisms found
along the way (leaves with equal encodings) prune branches whose subtrees
are images of ones already explored.

Outer ports are fixed: each gets a unique label, so isomorphisms never move
them.  Box names, slots, provenance notes and element values do not take
part.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable

from .diagram import BOX_IN, BOX_OUT, OUTER_IN, OUTER_OUT, WiringDiagram, natural_key


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


@dataclass
class PortGraph:
    """Labeled vertices and ``(src, src_port, tgt, tgt_port)`` edges."""

    labels: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)

    def add_node(self, node: Hashable, label: str) -> None:
        self.labels[node] = label

    def add_edge(self, src, sport: int, tgt, tport: int) -> None:
        self.edges.append((src, sport, tgt, tport))


# -- refinement ---------------------------------------------------------------


class _Search:
    def __init__(self, graph: PortGraph):
        self.graph = graph
        self.nodes = sorted(graph.labels, key=lambda n: (graph.labels[n], str(n)))
        self.index = {n: i for i, n in enumerate(self.nodes)}
        n = len(self.nodes)
        self.out_adj = [[] for _ in range(n)]
        self.in_adj = [[] for _ in range(n)]
        self.edges = []
        for s, sp, t, tp in graph.edges:
            si, ti = self.index[s], self.index[t]
            self.out_adj[si].append((sp, tp, ti))
            self.in_adj[ti].append((sp, tp, si))
            self.edges.append((si, sp, ti, tp))
        label_rank = {lab: r for r, lab in enumerate(sorted(set(graph.labels.values())))}
        self.initial = [label_rank[graph.labels[v]] for v in self.nodes]
        self.best = None
        self.best_order = None
        self.first_leaf = None
        self.first_order = None
        self.generators = []
        self._seen_generators = set()
        self.leaves_visited = 0

    def refine(self, colors: list) -> list:
        count = len(set(colors))
        while True:
            sigs = []
            for v in range(len(colors)):
                outs = sorted((sp, tp, colors[t]) for sp, tp, t in self.out_adj[v])
                ins = sorted((sp, tp, colors[s]) for sp, tp, s in self.in_adj[v])
                sigs.append((colors[v], tuple(outs), tuple(ins)))
            ranks = {sig: r for r, sig in enumerate(sorted(set(sigs)))}
            colors = [ranks[s] for s in sigs]
            if len(ranks) == count:
                return colors
            count = len(ranks)

    @staticmethod
    def individualize(colors: list, v: int) -> list:
        keyed = [(c, 0 if u == v else 1) for u, c in enumerate(colors)]
        ranks = {k: r for r, k in enumerate(sorted(set(keyed)))}
        return [ranks[k] for k in keyed]

    def encode(self, colors: list):
        # colors is discrete: colors[v] is v's position in the leaf order
        labels = tuple(self.initial[v] for v in sorted(range(len(colors)), key=colors.__getitem__))
        edges = tuple(sorted((colors[s], sp, colors[t], tp) for s, sp, t, tp in self.edges))
        return labels, edges

    def run(self) -> list:
        if self.nodes:
            self._search(self.refine(self.initial), [])
            order = sorted(range(len(self.nodes)), key=self.best_order.__getitem__)
        else:
            order = []
        return [self.nodes[i] for i in order]

    def _search(self, colors: list, prefix: list) -> None:
        cells = defaultdict(list)
        for v, c in enumerate(colors):
            cells[c].append(v)
        target = next((cells[c] for c in sorted(cells) if len(cells[c]) > 1), None)
        if target is None:
            self._leaf(colors)
            return
        # Orbits of the automorphisms found so far that fix the prefix,
        # kept in a union-find that absorbs new generators as they appear.
        parent = list(range(len(self.nodes)))
        absorbed = 0
        fixed = set(prefix)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a, b):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

        # Twins (same color, same neighborhood) are swapped by an automorphism
        # that moves nothing else, so they share an orbit from the start.
        twins = {}
        for v in target:
            key = (tuple(sorted(self.out_adj[v])), tuple(sorted(self.in_adj[v])))
            union(twins.setdefault(key, v), v)

        explored = []
        for v in target:
            for moved in self.generators[absorbed:]:
                if fixed.isdisjoint(moved):
                    for a, b in moved.items():
                        union(a, b)
            absorbed = len(self.generators)
            if any(find(v) == find(u) for u in explored):
                continue
            explored.append(v)
            self._search(self.refine(self.individualize(colors, v)), prefix + [v])

    def _leaf(self, colors: list) -> None:
        self.leaves_visited += 1
        enc = self.encode(colors)
        if self.first_leaf is None:
            self.first_leaf, self.first_order = enc, colors
        elif enc == self.first_leaf:
            self._record_automorphism(self.first_order, colors)
        if self.best is None or enc < self.best:
            self.best, self.best_order = enc, colors
        elif enc == self.best and self.best_order is not colors:
            self._record_automorphism(self.best_order, colors)

    def _record_automorphism(self, a: list, b: list) -> None:
        by_pos = [0] * len(a)
        for v, p in enumerate(b):
            by_pos[p] = v
        perm = [by_pos[a[v]] for v in range(len(a))]
        moved = {v: p for v, p in enumerate(perm) if v != p}
        key = tuple(sorted(moved.items()))
        if moved and key not in self._seen_generators:
            self._seen_generators.add(key)
            self.generators.append(moved)


def canonical_order(graph: PortGraph) -> list:
    """Vertices of ``graph`` in an isomorphism-invariant order."""
    return _Search(graph).run()


def canonical_encoding(graph: PortGraph) -> str:
    order = canonical_order(graph)
    pos = {v: i for i, v in enumerate(order)}
    labels = [graph.labels[v] for v in order]
    edges = sorted((pos[s], sp, pos[t], tp) for s, sp, t, tp in graph.edges)
    return _dumps({"nodes": labels, "edges": edges})


# -- diagrams -----------------------------------------------------------------


def _node(ep):
    if ep.kind == OUTER_IN:
        return ("in", ep.port)
    if ep.kind == OUTER_OUT:
        return ("out", ep.port)
    return ("box", ep.box)


def box_key(box) -> str:
    inner = canonical_form(box.inner).decode() if box.inner is not None else None
    return _dumps([0, box.label, list(box.inputs), list(box.outputs), inner])


def diagram_graph(d: WiringDiagram) -> PortGraph:
    g = PortGraph()
    for k, t in enumerate(d.inputs):
        g.add_node(("in", k), _dumps([1, "in", k, t]))
    for k, t in enumerate(d.outputs):
        g.add_node(("out", k), _dumps([2, "out", k, t]))
    for b, box in d.boxes.items():
        g.add_node(("box", b), box_key(box))
    for w in d.wires:
        sport = w.src.port if w.src.kind == BOX_OUT else 0
        tport = w.tgt.port if w.tgt.kind == BOX_IN else 0
        g.add_edge(_node(w.src), sport, _node(w.tgt), tport)
    return g


def canonical_box_order(d: WiringDiagram) -> list:
    """Box ids of ``d`` in canonical order."""
    return [n[1] for n in canonical_order(diagram_graph(d)) if n[0] == "box"]


def canonical_form(d: WiringDiagram) -> bytes:
    """Bytes that agree exactly when two diagrams are isomorphic."""
    order = canonical_box_order(d)
    pos = {b: i for i, b in enumerate(order)}

    def ref(ep):
        if ep.kind == OUTER_IN:
            return ["in", ep.port]
        if ep.kind == OUTER_OUT:
            return ["out", ep.port]
        return ["box", pos[ep.box], ep.port]

    payload = {
        "inputs": list(d.inputs),
        "outputs": list(d.outputs),
        "boxes": [json.loads(box_key(d.boxes[b])) for b in order],
        "wires": sorted([ref(w.src), ref(w.tgt)] for w in d.wires),
    }
    return _dumps(payload).encode("utf-8")


canonicalize = canonical_form


def is_isomorphic(a: WiringDiagram, b: WiringDiagram) -> bool:
    if (len(a.inputs), len(a.outputs), len(a.boxes), len(a.wires)) != (
        len(b.inputs),
        len(b.outputs),
        len(b.boxes),
        len(b.wires),
    ):
        return False
    return canonical_form(a) == canonical_form(b)


def canonical_relabel(d: WiringDiagram, prefix: str = "b") -> WiringDiagram:
    """Rename boxes to ``b0, b1, ...`` following the canonical order."""
    from .diagram import rename_boxes

    order = canonical_box_order(d)
    return rename_boxes(d, {b: f"{prefix}{i}" for i, b in enumerate(order)})


__all__ = [
    "PortGraph",
    "box_key",
    "canonical_box_order",
    "canonical_encoding",
    "canonical_form",
    "canonical_order",
    "canonical_relabel",
    "canonicalize",
    "diagram_graph",
    "is_isomorphic",
    "natural_key",
]
