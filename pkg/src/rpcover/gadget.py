"""Lower-bound instances: layered comb trees with a common sink.

An ``(l, k)``-inner tree is a zero-weight spine ``y_l -> ... -> y_1`` rooted
at ``y_l`` with a leaf edge ``y_i -> z_i`` of weight ``i * k`` at every spine
node. The tree ``T`` starts as an ``(L, L**(2f))``-inner tree; in round
``j = 1 .. f-1`` every leaf at hop distance ``d < L`` becomes the root of an
``(L - d, L**(2(f-j)))``-inner tree. Leaves that still sit at hop ``d < L``
after the last round are padded with a zero-weight chain of ``L - d`` edges
so that every root-to-leaf path has ``L`` edges. Every leaf gets a
weight-1 edge to the sink ``v``.

For leaf ``x``, ``F_x`` holds the spine out-edge ``y_i -> y_{i-1}`` of the
deepest on-path node of each inner tree the path leaves through ``z_i`` with
``i >= 2``; the leaf edge of that node is on the path itself.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from math import comb

from .errors import ConfigError, FormatError, InputError
from .forest import RpcForest, query
from .graph import Graph, as_mask, format_graph, mask_ids, parse_graph

__all__ = [
    "InnerTree",
    "GadgetLeaf",
    "Gadget",
    "build_inner_tree",
    "build_gadget",
    "leaf_count_bound",
    "lower_bound_value",
    "check_unique_replacement",
    "certify_rpc_against_gadget",
    "write_gadget",
    "read_gadget",
]


@dataclass(frozen=True)
class InnerTree:
    """Local vertex ids: ``y_i`` is ``i - 1``, ``z_i`` is ``length + i - 1``."""

    length: int
    k: int

    def y(self, i: int) -> int:
        return i - 1

    def z(self, i: int) -> int:
        return self.length + i - 1

    @property
    def spine_edges(self) -> list[tuple[int, int, int]]:
        return [(self.y(i + 1), self.y(i), 0) for i in range(self.length - 1, 0, -1)]

    @property
    def leaf_edges(self) -> list[tuple[int, int, int]]:
        return [(self.y(i), self.z(i), i * self.k) for i in range(1, self.length + 1)]

    def graph(self) -> Graph:
        return Graph(2 * self.length, self.spine_edges + self.leaf_edges, allow_zero=True)


def build_inner_tree(length: int, k: int) -> InnerTree:
    if length < 1 or k < 1:
        raise InputError("inner tree needs length >= 1 and k >= 1")
    return InnerTree(length, k)


@dataclass(frozen=True)
class GadgetLeaf:
    vertex: int
    level: int
    spine: tuple
    F: int
    path: tuple  # edge ids of T[s, x] followed by (x, v)

    @property
    def failure_ids(self) -> list[int]:
        return mask_ids(self.F)

    @property
    def path_mask(self) -> int:
        return as_mask(self.path)


@dataclass
class Gadget:
    L: int
    f: int
    graph: Graph
    s: int
    v: int
    leaves: list = field(default_factory=list)

    @property
    def max_failures(self) -> int:
        return max((leaf.F.bit_count() for leaf in self.leaves), default=0)


class _Builder:
    def __init__(self):
        self.n = 1
        self.edges: list = []
        self.parent_edge: dict = {}

    def vertex(self) -> int:
        self.n += 1
        return self.n - 1

    def edge(self, tail, head, w) -> int:
        self.edges.append((tail, head, w))
        eid = len(self.edges) - 1
        self.parent_edge[head] = eid
        return eid

    def path_to(self, x) -> list[int]:
        out = []
        while x in self.parent_edge:
            eid = self.parent_edge[x]
            out.append(eid)
            x = self.edges[eid][0]
        out.reverse()
        return out

    def inner(self, root, length, k, hop, level, spine, fx):
        """Grow an inner tree at ``root``; returns the new leaves."""
        y = {length: root}
        down = {}
        for i in range(length - 1, 0, -1):
            y[i] = self.vertex()
            down[i + 1] = self.edge(y[i + 1], y[i], 0)
        out = []
        for i in range(1, length + 1):
            z = self.vertex()
            self.edge(y[i], z, i * k)
            r = length - i + 1
            cut = fx | (1 << down[i]) if i >= 2 else fx
            out.append([z, hop + r, level, spine + (r,), cut])
        return out


def build_gadget(L: int, f: int) -> Gadget:
    if L < 2 or f < 1:
        raise InputError("gadget needs L >= 2 and f >= 1")
    b = _Builder()
    s = 0
    leaves = b.inner(s, L, L ** (2 * f), 0, 1, (), 0)
    for j in range(1, f):
        k = L ** (2 * (f - j))
        nxt = []
        for z, hop, level, spine, fx in leaves:
            if hop < L:
                nxt.extend(b.inner(z, L - hop, k, hop, level + 1, spine, fx))
            else:
                nxt.append([z, hop, level, spine, fx])
        leaves = nxt
    final = []
    for z, hop, level, spine, fx in leaves:
        while hop < L:
            w = b.vertex()
            b.edge(z, w, 0)
            z, hop = w, hop + 1
        final.append((z, level, spine, fx))
    v = b.vertex()
    out = []
    for z, level, spine, fx in final:
        path = b.path_to(z)
        sink = len(b.edges)
        b.edges.append((z, v, 1))
        out.append(GadgetLeaf(z, level, spine, fx, tuple(path) + (sink,)))
    g = Graph(b.n, b.edges, directed=True, allow_zero=True)
    return Gadget(L, f, g, s, v, out)


def leaf_count_bound(L: int, f: int) -> int:
    """``sum_{j=1}^{f} C(L-1, j-1)``: compositions of ``L`` into at most ``f`` parts."""
    return sum(comb(L - 1, j - 1) for j in range(1, f + 1))


def lower_bound_value(L: int, f: int, n: int) -> int:
    """``min(sum_{i=0}^{f-1} C(L-2, i), n)``."""
    if L < 2 or f < 1 or n < 1:
        raise InputError("need L >= 2, f >= 1, n >= 1")
    return min(sum(comb(L - 2, i) for i in range(f)), n)


def _all_paths(g: Graph, avoid: int, s: int, v: int):
    """Every simple ``s``-``v`` path in ``g - avoid`` as ``(weight, eids)``."""
    out = []
    stack = [(s, 0, (), frozenset([s]))]
    while stack:
        x, w, seq, seen = stack.pop()
        if x == v:
            out.append((w, seq))
            continue
        for tail, head, wt, eid in g.out_arcs[x]:
            if avoid >> eid & 1 or head in seen:
                continue
            stack.append((head, w + wt, seq + (eid,), seen | {head}))
    return out


def check_unique_replacement(gadget: Gadget, leaf, F: int | None = None) -> bool:
    """Brute force: ``T[s,x] + (x,v)`` is the unique shortest path in ``G - F_x``.

    ``leaf`` is a :class:`GadgetLeaf` or an index into ``gadget.leaves``;
    ``F`` overrides ``F_x``.
    """
    if isinstance(leaf, int):
        leaf = gadget.leaves[leaf]
    F = leaf.F if F is None else as_mask(F)
    g = gadget.graph
    paths = _all_paths(g, F, gadget.s, gadget.v)
    if not paths:
        return False
    paths.sort()
    best_w, best = paths[0]
    target_w = sum(g.edges[e].weight for e in leaf.path)
    unique = len(paths) == 1 or paths[1][0] > best_w
    return unique and best == leaf.path and best_w == target_w and len(best) == gadget.L + 1


@dataclass
class CertificationReport:
    leaves: int
    covering_value: int
    bound: int
    witnesses: list
    missing: list
    injective: bool

    @property
    def ok(self) -> bool:
        return (not self.missing and self.injective
                and self.covering_value >= self.leaves >= self.bound)

    def text(self) -> str:
        lines = [
            f"leaves |X| = {self.leaves}",
            f"covering value = {self.covering_value}",
            f"leaf-count bound = {self.bound}",
            f"witnessed leaves = {len(self.witnesses) - len(self.missing)}",
            f"injective = {self.injective}",
            f"certificate {'PASS' if self.ok else 'FAIL'}",
        ]
        lines += [f"missing witness for leaf {x}" for x in self.missing]
        return "\n".join(lines)


def certify_rpc_against_gadget(gadget: Gadget, forest: RpcForest, cutoff: int | None = None,
                               f: int | None = None) -> CertificationReport:
    """Map every leaf to a selected subgraph keeping its unique replacement path.

    Distinct leaves must map to distinct subgraphs, so a valid covering of
    the gadget has at least ``|X|`` members.
    """
    cutoff = gadget.L + 1 if cutoff is None else cutoff
    f = forest.params.f if f is None else f
    if cutoff != gadget.L + 1:
        raise ConfigError(f"cutoff must be L+1 = {gadget.L + 1}, got {cutoff}")
    if forest.params.L != cutoff:
        raise ConfigError(f"forest hop cutoff {forest.params.L} differs from {cutoff}")
    if f < gadget.max_failures or forest.params.f < gadget.max_failures:
        raise ConfigError(f"sensitivity must be at least {gadget.max_failures}")
    if forest.fingerprint != gadget.graph.fingerprint:
        raise ConfigError("forest was built for a different graph")
    witnesses, missing = [], []
    for x, leaf in enumerate(gadget.leaves):
        res = query(forest, leaf.F)
        keep = leaf.path_mask
        hit = next((A for A in res.masks() if not A & keep), None)
        witnesses.append(hit)
        if hit is None:
            missing.append(x)
    found = [A for A in witnesses if A is not None]
    return CertificationReport(
        leaves=len(gadget.leaves),
        covering_value=forest.covering_value,
        bound=leaf_count_bound(gadget.L, gadget.f),
        witnesses=witnesses,
        missing=missing,
        injective=len(set(found)) == len(found),
    )


GRAPH_FILE = "graph.txt"
LEAF_FILE = "leaves.txt"


def write_gadget(gadget: Gadget, directory) -> None:
    """``graph.txt`` in the graph format plus the ``leaves.txt`` sidecar."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, GRAPH_FILE), "w") as fh:
        fh.write(format_graph(gadget.graph))
    lines = [f"gadget {gadget.L} {gadget.f} {gadget.s} {gadget.v} {len(gadget.leaves)}"]
    for leaf in gadget.leaves:
        spine = ",".join(map(str, leaf.spine))
        fx = ",".join(map(str, leaf.failure_ids)) or "-"
        path = ",".join(map(str, leaf.path))
        lines.append(f"leaf {leaf.vertex} level {leaf.level} spine {spine} F {fx} path {path}")
    with open(os.path.join(directory, LEAF_FILE), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_gadget(directory) -> Gadget:
    with open(os.path.join(directory, GRAPH_FILE)) as fh:
        g = parse_graph(fh.read(), allow_zero=True)
    with open(os.path.join(directory, LEAF_FILE)) as fh:
        lines = fh.read().splitlines()
    try:
        tag, L, f, s, v, count = lines[0].split()
        if tag != "gadget":
            raise ValueError
        L, f, s, v, count = int(L), int(f), int(s), int(v), int(count)
        leaves = []
        for line in lines[1:]:
            tok = line.split()
            if len(tok) != 10 or tok[0] != "leaf":
                raise ValueError
            fx = [] if tok[7] == "-" else [int(e) for e in tok[7].split(",")]
            leaves.append(GadgetLeaf(
                int(tok[1]), int(tok[3]), tuple(int(r) for r in tok[5].split(",")),
                as_mask(fx), tuple(int(e) for e in tok[9].split(",")),
            ))
    except (ValueError, IndexError) as exc:
        raise FormatError("malformed gadget sidecar") from exc
    if len(leaves) != count:
        raise FormatError(f"sidecar lists {len(leaves)} leaves, header says {count}")
    return Gadget(L, f, g, s, v, leaves)
