"""Weighted graphs with stable edge ids and exact shortest-path routines.

Edge sets are plain Python ints used as bitmasks over edge ids: bit ``e`` is
set iff edge ``e`` is a member. Every routine that takes an ``avoid`` set
accepts either such a mask or an iterable of edge ids.

Distances are exact (``int`` or ``fractions.Fraction``); an unreachable
target has distance ``math.inf``.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple

import numpy as np

from .errors import InputError

UNREACHABLE = math.inf

__all__ = [
    "UNREACHABLE",
    "Edge",
    "Graph",
    "PathResult",
    "as_mask",
    "mask_ids",
    "mask_to_bytes",
    "bytes_to_mask",
    "parse_graph",
    "format_graph",
    "read_graph",
    "write_graph",
    "shortest_path_min_hops",
    "shortest_path_labels",
    "hop_bounded_distance",
    "hop_bounded_distances_batch",
    "replacement_distance",
]


def as_mask(edges) -> int:
    """Normalize an edge set given as a mask or an iterable of ids."""
    if isinstance(edges, (int, np.integer)):
        if edges < 0:
            raise InputError("edge mask must be nonnegative")
        return int(edges)
    mask = 0
    for e in edges:
        e = int(e)
        if e < 0:
            raise InputError(f"negative edge id {e}")
        mask |= 1 << e
    return mask


def mask_ids(mask: int) -> list[int]:
    """Edge ids of ``mask`` in ascending order."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def mask_to_bytes(mask: int, nbytes: int) -> bytes:
    return mask.to_bytes(nbytes, "little")


def bytes_to_mask(row) -> int:
    return int.from_bytes(bytes(row), "little")


def _parse_weight(token: str):
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad weight {token!r}") from exc


def _format_weight(w) -> str:
    if isinstance(w, Fraction):
        return str(w.numerator) if w.denominator == 1 else f"{w.numerator}/{w.denominator}"
    return str(w)


@dataclass(frozen=True)
class Edge:
    id: int
    tail: int
    head: int
    weight: int | Fraction


class Graph:
    """Directed or undirected multigraph with dense edge ids ``0..m-1``.

    An undirected edge is expanded into two arcs sharing one edge id, so
    failing the edge removes both directions. Weights must be strictly
    positive unless ``allow_zero`` is set (the lower-bound gadget needs
    zero-weight spines).
    """

    def __init__(self, n: int, edges: Iterable, directed: bool = True, allow_zero: bool = False):
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise InputError(f"vertex count must be a positive integer, got {n!r}")
        self.n = int(n)
        self.directed = bool(directed)
        self.allow_zero = bool(allow_zero)
        built = []
        for eid, item in enumerate(edges):
            tail, head, weight = item
            tail, head = int(tail), int(head)
            if not (0 <= tail < self.n and 0 <= head < self.n):
                raise InputError(f"edge {eid}: endpoint outside 0..{self.n - 1}")
            if isinstance(weight, float):
                weight = Fraction(weight)
            if isinstance(weight, Fraction) and weight.denominator == 1:
                weight = int(weight)
            if not isinstance(weight, (int, Fraction)) or isinstance(weight, bool):
                raise InputError(f"edge {eid}: weight must be an integer or rational")
            if weight < 0 or (weight == 0 and not allow_zero):
                raise InputError(f"edge {eid}: weight must be positive, got {weight}")
            built.append(Edge(eid, tail, head, weight))
        self.edges: tuple[Edge, ...] = tuple(built)
        self.m = len(self.edges)
        self.all_edges = (1 << self.m) - 1
        self.nbytes = max(1, (self.m + 7) // 8)
        self.integral = all(isinstance(e.weight, int) for e in self.edges)

        arcs = []
        for e in self.edges:
            arcs.append((e.tail, e.head, e.weight, e.id))
            if not self.directed and e.tail != e.head:
                arcs.append((e.head, e.tail, e.weight, e.id))
        self.arcs: tuple[tuple, ...] = tuple(arcs)
        self.out_arcs: list[list[tuple]] = [[] for _ in range(self.n)]
        self.in_arcs: list[list[tuple]] = [[] for _ in range(self.n)]
        for a in self.arcs:
            self.out_arcs[a[0]].append(a)
            self.in_arcs[a[1]].append(a)
        for lst in self.in_arcs:
            lst.sort(key=lambda a: (a[3], a[0]))
        self._fingerprint = None
        self._arc_arrays = None

    def __repr__(self):
        kind = "directed" if self.directed else "undirected"
        return f"Graph(n={self.n}, m={self.m}, {kind})"

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and self.directed == other.directed
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash(self.fingerprint)

    @property
    def fingerprint(self) -> tuple[int, int, str]:
        """``(n, m, sha256 of the canonical text form)``."""
        if self._fingerprint is None:
            digest = hashlib.sha256(format_graph(self).encode()).hexdigest()
            self._fingerprint = (self.n, self.m, digest)
        return self._fingerprint

    def check_vertex(self, v) -> int:
        if not isinstance(v, (int, np.integer)) or not 0 <= v < self.n:
            raise InputError(f"invalid vertex id {v!r} (n={self.n})")
        return int(v)

    def edge_mask(self, edges) -> int:
        """Validate an edge set against this graph and return its mask."""
        mask = as_mask(edges)
        if mask >> self.m:
            raise InputError(f"edge id out of range 0..{self.m - 1}")
        return mask

    def arc_arrays(self):
        """``(tails, heads, weights, edge_ids)`` as numpy arrays (integral graphs)."""
        if self._arc_arrays is None:
            t = np.array([a[0] for a in self.arcs], dtype=np.int64)
            h = np.array([a[1] for a in self.arcs], dtype=np.int64)
            w = np.array([int(a[2]) for a in self.arcs], dtype=np.int64) if self.integral else None
            e = np.array([a[3] for a in self.arcs], dtype=np.int64)
            self._arc_arrays = (t, h, w, e)
        return self._arc_arrays

    def total_weight(self):
        return sum((e.weight for e in self.edges), 0)


# -- text format ----------------------------------------------------------


def format_graph(g: Graph) -> str:
    kind = "directed" if g.directed else "undirected"
    lines = [f"graph {g.n} {g.m} {kind}"]
    lines += [f"{e.id} {e.tail} {e.head} {_format_weight(e.weight)}" for e in g.edges]
    return "\n".join(lines) + "\n"


def parse_graph(text: str, allow_zero: bool = False) -> Graph:
    """Parse the ``graph <n> <m> <directed|undirected>`` text format."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise InputError("empty graph file")
    lineno, head = rows[0]
    if len(head) != 4 or head[0] != "graph" or head[3] not in ("directed", "undirected"):
        raise InputError(f"line {lineno}: expected 'graph <n> <m> <directed|undirected>'")
    try:
        n, m = int(head[1]), int(head[2])
    except ValueError as exc:
        raise InputError(f"line {lineno}: bad vertex or edge count") from exc
    body = rows[1:]
    if len(body) != m:
        raise InputError(f"header announces {m} edges, found {len(body)}")
    edges = []
    for idx, (lineno, tok) in enumerate(body):
        if len(tok) != 4:
            raise InputError(f"line {lineno}: expected '<edge_id> <tail> <head> <weight>'")
        try:
            eid, tail, hd = int(tok[0]), int(tok[1]), int(tok[2])
        except ValueError as exc:
            raise InputError(f"line {lineno}: non-integer id") from exc
        if eid != idx:
            raise InputError(f"line {lineno}: edge id {eid} out of sequence (expected {idx})")
        w = _parse_weight(tok[3])
        if w == 0 and not allow_zero:
            raise InputError(f"line {lineno}: zero-weight edge rejected")
        edges.append((tail, hd, w))
    return Graph(n, edges, directed=head[3] == "directed", allow_zero=allow_zero)


def read_graph(path, allow_zero: bool = False) -> Graph:
    with open(path) as fh:
        return parse_graph(fh.read(), allow_zero=allow_zero)


def write_graph(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_graph(g))


# -- shortest paths -------------------------------------------------------


class PathResult(NamedTuple):
    distance: int | Fraction
    hops: int
    edge_sequence: tuple[int, ...]


def shortest_path_labels(g: Graph, avoid, s: int, reverse: bool = False) -> list:
    """Lexicographic ``(distance, hops)`` labels from ``s`` in ``g - avoid``.

    With ``reverse=True`` the labels are distances *to* ``s``. Unreached
    vertices get ``None``.
    """
    s = g.check_vertex(s)
    avoid = as_mask(avoid)
    adj = g.in_arcs if reverse else g.out_arcs
    label = [None] * g.n
    label[s] = (0, 0)
    heap = [(0, 0, s)]
    while heap:
        d, hops, v = heapq.heappop(heap)
        if label[v] != (d, hops):
            continue
        for arc in adj[v]:
            if avoid >> arc[3] & 1:
                continue
            u = arc[0] if reverse else arc[1]
            cand = (d + arc[2], hops + 1)
            cur = label[u]
            if cur is None or cand < cur:
                label[u] = cand
                heapq.heappush(heap, (cand[0], cand[1], u))
    return label


def _reconstruct(g: Graph, avoid: int, label: list, s: int, t: int) -> tuple[int, ...]:
    seq = []
    v = t
    while v != s:
        want = label[v]
        for tail, _head, w, eid in g.in_arcs[v]:
            if avoid >> eid & 1:
                continue
            lu = label[tail]
            if lu is not None and (lu[0] + w, lu[1] + 1) == want:
                seq.append(eid)
                v = tail
                break
        else:  # pragma: no cover - labels are always consistent
            raise AssertionError("inconsistent shortest-path labels")
    seq.reverse()
    return tuple(seq)


def shortest_path_min_hops(g: Graph, avoid, s: int, t: int) -> PathResult | None:
    """Canonical shortest ``s``-``t`` path in ``g - avoid``.

    Among shortest paths the one with fewest edges is returned; remaining
    ties are broken while walking back from ``t`` by taking the predecessor
    edge with the smallest id. Returns ``None`` if ``t`` is unreachable.
    """
    s, t = g.check_vertex(s), g.check_vertex(t)
    avoid = as_mask(avoid)
    label = shortest_path_labels(g, avoid, s)
    if label[t] is None:
        return None
    dist, hops = label[t]
    return PathResult(dist, hops, _reconstruct(g, avoid, label, s, t))


def replacement_distance(g: Graph, s: int, t: int, F) -> int | Fraction | float:
    """Exact ``d(s, t, F)``: the distance from ``s`` to ``t`` in ``g - F``."""
    t = g.check_vertex(t)
    lab = shortest_path_labels(g, F, s)[t]
    return UNREACHABLE if lab is None else lab[0]


def hop_bounded_distance(g: Graph, avoid, s: int, t: int, L: int):
    """Minimum weight of an ``s``-``t`` path with at most ``L`` edges in ``g - avoid``."""
    s, t = g.check_vertex(s), g.check_vertex(t)
    if L < 0:
        raise InputError("hop budget must be nonnegative")
    avoid = as_mask(avoid)
    arcs = [a for a in g.arcs if not avoid >> a[3] & 1]
    dist = [UNREACHABLE] * g.n
    dist[s] = 0
    for _ in range(min(L, g.n - 1)):
        nxt = dist[:]
        changed = False
        for tail, head, w, _eid in arcs:
            dt = dist[tail]
            if dt is not UNREACHABLE and dt + w < nxt[head]:
                nxt[head] = dt + w
                changed = True
        dist = nxt
        if not changed:
            break
    return dist[t]


_BIG = np.int64(1) << np.int64(61)


def hop_bounded_distances_batch(g: Graph, removal_rows: np.ndarray, s: int, L: int) -> list:
    """Hop-bounded distances from ``s`` to every vertex, for many removal sets.

    ``removal_rows`` is a ``(k, nbytes)`` uint8 array of packed masks. Uses an
    exact int64 dense relaxation when the weights allow it and falls back to
    the pure-Python routine otherwise. Returns ``k`` lists of length ``n``.
    """
    s = g.check_vertex(s)
    k = len(removal_rows)
    if k == 0:
        return []
    if not g.integral or g.m == 0 or g.total_weight() >= int(_BIG) >> 2:
        out = []
        for row in removal_rows:
            mask = bytes_to_mask(row)
            out.append([hop_bounded_distance(g, mask, s, t, L) for t in range(g.n)])
        return out
    tails, heads, weights, eids = g.arc_arrays()
    bits = np.unpackbits(removal_rows, axis=1, count=g.m, bitorder="little").astype(bool)
    present = ~bits[:, eids]
    vals = np.where(present, weights[None, :], _BIG)
    W = np.full((k, g.n, g.n), _BIG, dtype=np.int64)
    rows = np.broadcast_to(np.arange(k)[:, None], vals.shape)
    np.minimum.at(W, (rows, np.broadcast_to(tails, vals.shape), np.broadcast_to(heads, vals.shape)), vals)
    dist = np.full((k, g.n), _BIG, dtype=np.int64)
    dist[:, s] = 0
    for _ in range(min(L, g.n - 1)):
        relaxed = np.minimum((dist[:, :, None] + W).min(axis=1), _BIG)
        nxt = np.minimum(dist, relaxed)
        if np.array_equal(nxt, dist):
            break
        dist = nxt
    return [[UNREACHABLE if x >= _BIG else int(x) for x in row] for row in dist.tolist()]
