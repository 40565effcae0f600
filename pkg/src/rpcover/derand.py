"""Deterministic sampling trees by the method of conditional expectations.

The collection ``C`` holds one pair ``(P, F)`` per distinct canonical
replacement path ``P = P(s, t, F)`` with at most ``L`` edges. Trees are
built one at a time; every child removal set is fixed edge by edge so that
the conditional expectation of ``sum(X - Y/2)`` over the child's workset
never decreases, where ``X``/``Y`` flag well/poorly separated pairs.

Per pair, with ``a`` undecided failure edges, ``c`` path edges already put
in ``A_y`` and ``u`` path edges still undecided, twice the conditional
expectation is the integer polynomial ``x**a * (3*T(c, u) - 1)`` evaluated
at ``x = p``, where ``T`` is the binomial tail ``Pr[c + Bin(u, x) <= t_d]``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np

from .certified import DEFAULT_MAX_BITS, DEFAULT_START_BITS, CertifiedReal, certified_value, poly_sign
from .errors import CapacityError, ConfigError, InvariantError
from .forest import RpcForest, _preorder, forest_from_masks
from .graph import Graph, _reconstruct, as_mask, mask_to_bytes, shortest_path_labels
from .params import RpcParams, derive_params, det_tree_bound

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 50_000_000

__all__ = [
    "PathFailurePair",
    "PairCollection",
    "SeparationClass",
    "DerandAudit",
    "enumeration_cost",
    "enumerate_pairs",
    "classify",
    "conditional_objective",
    "derandomize_child",
    "derandomize_forest",
    "build_det",
]


@dataclass(frozen=True)
class PathFailurePair:
    P: int
    F: int
    provenance: tuple = ()

    def __post_init__(self):
        if self.P & self.F:
            raise ValueError("path and failure sets must be disjoint")


class SeparationClass(enum.Enum):
    WELL = "well"
    POOR = "poor"
    PASSIVE = "passive"


class PairCollection:
    """Deduplicated pairs ``(P, F)`` over a graph with ``m`` edges."""

    def __init__(self, m: int):
        self.m = m
        self.P: list[int] = []
        self.F: list[int] = []
        self.provenance: list[list] = []
        self._index: dict = {}
        self._arrays = None

    @classmethod
    def from_pairs(cls, m: int, pairs) -> "PairCollection":
        out = cls(m)
        for pr in pairs:
            if isinstance(pr, PathFailurePair):
                out.add(pr.P, pr.F, *pr.provenance)
            else:
                out.add(as_mask(pr[0]), as_mask(pr[1]))
        return out

    def add(self, P: int, F: int, *origins):
        key = (P, F)
        i = self._index.get(key)
        if i is None:
            if P & F:
                raise ValueError("path and failure sets must be disjoint")
            i = self._index[key] = len(self.P)
            self.P.append(P)
            self.F.append(F)
            self.provenance.append([])
            self._arrays = None
        self.provenance[i].extend(origins)
        return i

    def __len__(self):
        return len(self.P)

    def __getitem__(self, i) -> PathFailurePair:
        return PathFailurePair(self.P[i], self.F[i], tuple(self.provenance[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __contains__(self, key):
        if isinstance(key, PathFailurePair):
            key = (key.P, key.F)
        return key in self._index

    def arrays(self) -> "_PairArrays":
        if self._arrays is None:
            self._arrays = _PairArrays(self)
        return self._arrays


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int32)


def _rows(masks, nbytes):
    buf = b"".join(mask_to_bytes(mk, nbytes) for mk in masks)
    return np.frombuffer(buf, dtype=np.uint8).reshape(len(masks), nbytes)


def _csr(rows: np.ndarray, m: int):
    """Per-edge lists of pair ids: ``ids[ptr[e]:ptr[e+1]]`` contain edge ``e``."""
    bits = np.unpackbits(rows, axis=1, bitorder="little")[:, :m]
    edge, pair = np.nonzero(bits.T)
    ptr = np.zeros(m + 1, dtype=np.int64)
    np.add.at(ptr, edge + 1, 1)
    return np.cumsum(ptr), pair.astype(np.int64)


class _PairArrays:
    def __init__(self, pc: PairCollection):
        m = max(pc.m, 1)
        self.nbytes = (m + 7) // 8
        self.Prows = _rows(pc.P, self.nbytes)
        self.fsize = np.array([F.bit_count() for F in pc.F], dtype=np.int64)
        self.Fptr, self.Fids = _csr(_rows(pc.F, self.nbytes), pc.m)
        self.Pptr, self.Pids = _csr(self.Prows, pc.m)


# -- enumeration ----------------------------------------------------------


def enumeration_cost(g: Graph, f: int) -> int:
    """``sum_{i<=f} C(m, i) * n**2``: the number of (F, s, t) queries."""
    return sum(comb(g.m, i) for i in range(f + 1)) * g.n * g.n


def _sources_result(g: Graph, avoid: int, s: int):
    label = shortest_path_labels(g, avoid, s)
    paths = {}
    union = 0
    for t in range(g.n):
        if t == s or label[t] is None:
            continue
        seq = _reconstruct(g, avoid, label, s, t)
        P = as_mask(seq)
        paths[t] = (P, len(seq))
        union |= P
    return paths, union


def enumerate_pairs(g: Graph, f: int, L: int, budget: int = DEFAULT_BUDGET) -> PairCollection:
    """All canonical pairs ``(P(s,t,F), F)`` with ``|F| <= f`` and ``<= L`` hops.

    Failure sets are visited as a prefix tree (edge ids increasing). A source
    whose canonical paths avoid the newly added edge keeps its paths
    unchanged, so only affected sources are recomputed.
    """
    need = enumeration_cost(g, f)
    if need > budget:
        raise CapacityError(
            f"pair enumeration needs {need} (F, s, t) queries, budget is {budget}",
            required=need, budget=budget,
        )
    pc = PairCollection(g.m)
    sources = range(g.n)

    def emit(F, results):
        for s, (paths, _u) in enumerate(results):
            for t, (P, hops) in paths.items():
                if hops <= L:
                    pc.add(P, F, (s, t))

    def grow(F, size, last, results):
        emit(F, results)
        if size == f:
            return
        for e in range(last + 1, g.m):
            F2 = F | (1 << e)
            nxt = [
                _sources_result(g, F2, s) if res[1] >> e & 1 else res
                for s, res in enumerate(results)
            ]
            grow(F2, size + 1, e, nxt)

    grow(0, 0, -1, [_sources_result(g, 0, s) for s in sources])
    return pc


# -- classification and objective -----------------------------------------


def classify(pair, A_x: int, d: int, params: RpcParams) -> SeparationClass:
    """Separation class of ``pair`` at a depth-``d`` node removing ``A_x``."""
    P, F = (pair.P, pair.F) if isinstance(pair, PathFailurePair) else (as_mask(pair[0]), as_mask(pair[1]))
    if F & ~A_x:
        return SeparationClass.PASSIVE
    if params.is_well((P & A_x).bit_count(), d):
        return SeparationClass.WELL
    return SeparationClass.POOR


def _padd(a, b, k=1):
    if len(a) < len(b):
        a = a + [0] * (len(b) - len(a))
    for i, v in enumerate(b):
        a[i] += k * v
    return a


def _pmul(a, b):
    out = [0] * (len(a) + len(b) - 1)
    for i, u in enumerate(a):
        if u:
            for j, v in enumerate(b):
                out[i + j] += u * v
    return out


_basis_cache: dict = {}


def _basis(a: int, c: int, u: int, t: int) -> list[int]:
    """Coefficients of ``x**a * (3*T - 1)`` with ``T = Pr[c + Bin(u,x) <= t]``."""
    key = (a, c, u, t)
    poly = _basis_cache.get(key)
    if poly is None:
        T = [0]
        for k in range(0, min(t - c, u) + 1):
            term = _pmul([0] * k + [comb(u, k)], _pow_one_minus(u - k))
            T = _padd(T, term)
        T = [3 * v for v in T]
        T[0] -= 1
        poly = [0] * a + T
        _basis_cache[key] = poly
    return poly


def _pow_one_minus(k: int) -> list[int]:
    return [comb(k, i) * (-1) ** i for i in range(k + 1)]


def conditional_objective(D, A_parent: int, decided_in: int, decided_out: int, d: int,
                          params: RpcParams, bits: int = DEFAULT_START_BITS) -> CertifiedReal:
    """Certified ``E[sum(X - Y/2)]`` for a depth-``d`` child of a node removing ``A_parent``.

    Undecided edges of ``A_parent`` join ``A_y`` independently with probability
    ``p``; edges outside ``A_parent`` never do.
    """
    if decided_in & decided_out or (decided_in | decided_out) & ~A_parent:
        raise ConfigError("decided sets must be disjoint subsets of A_parent")
    t = params.threshold(d)
    und = A_parent & ~decided_in & ~decided_out
    total = [0]
    for pr in D:
        P, F = (pr.P, pr.F) if isinstance(pr, PathFailurePair) else pr
        if F & ~(decided_in | und):
            continue
        a = (F & und).bit_count()
        c = (P & decided_in).bit_count()
        u = (P & und).bit_count()
        total = _padd(total, _basis(a, c, u, t))
    return certified_value(total, params.point, denominator=2, bits=bits)


# -- derandomization ------------------------------------------------------


@dataclass
class ChildRecord:
    tree: int
    node: int
    child: int
    size: int
    well: int
    poor: int
    expectation: CertifiedReal
    alpha: int

    @property
    def realized(self) -> Fraction:
        return Fraction(2 * self.well - self.poor, 2)

    @property
    def progress_ok(self) -> bool:
        """Realized objective is at least ``|D| / (4 alpha)``."""
        return 2 * self.alpha * (2 * self.well - self.poor) >= self.size

    @property
    def monotone_ok(self) -> bool:
        return self.realized >= self.expectation.lo


@dataclass
class NodeRecord:
    tree: int
    node: int
    dx: int
    sum_dy: int

    @property
    def retention_ok(self) -> bool:
        return 11 * self.sum_dy >= 2 * self.dx

    def line(self) -> str:
        status = "ok" if self.retention_ok else "FAIL"
        return f"tree {self.tree} node {self.node} |Dx| {self.dx} sumDy {self.sum_dy} retention {status}"


@dataclass
class DerandAudit:
    pairs: int
    K_max: int
    trees_used: int = 0
    nodes: list = field(default_factory=list)
    children: list = field(default_factory=list)
    escalations: list = field(default_factory=list)
    handled_by: np.ndarray | None = None

    @property
    def retention_ok(self) -> bool:
        return all(r.retention_ok for r in self.nodes)

    @property
    def progress_ok(self) -> bool:
        return all(r.progress_ok for r in self.children)

    def lines(self) -> list[str]:
        return [r.line() for r in self.nodes] + list(self.escalations)


class _ChildSolver:
    """Vectorized edge-by-edge derandomization of single children."""

    def __init__(self, pc: PairCollection, params: RpcParams, start_bits: int, max_bits: int,
                 escalations: list | None = None):
        self.pc, self.params = pc, params
        self.arr = pc.arrays()
        self.start_bits, self.max_bits = start_bits, max_bits
        self.escalations = escalations if escalations is not None else []
        N = len(pc)
        self.a = np.zeros(N, dtype=np.int64)
        self.c = np.zeros(N, dtype=np.int64)
        self.u = np.zeros(N, dtype=np.int64)
        self.live = np.zeros(N, dtype=bool)

    def _accumulate(self, total, codes, sign, t, make):
        if not len(codes):
            return total
        uniq, cnt = np.unique(codes, axis=0, return_counts=True)
        for (a, c, u), k in zip(uniq.tolist(), cnt.tolist()):
            total = _padd(total, make(a, c, u, t), sign * k)
        return total

    def expectation(self, D, t) -> CertifiedReal:
        codes = np.stack([self.a[D], self.c[D], self.u[D]], axis=1)
        total = self._accumulate([0], codes, 1, t, _basis)
        return certified_value(total, self.params.point, denominator=2, bits=self.start_bits)

    def solve(self, D: np.ndarray, A_parent: int, d: int, where: str = ""):
        """Returns ``(A_child, well_ids, poor_ids, passive_ids, expectation)``."""
        arr, t = self.arr, self.params.threshold(d)
        if not len(D):
            empty = D[:0]
            return 0, empty, empty, empty, CertifiedReal.exact(0)
        Arow = np.frombuffer(mask_to_bytes(A_parent, arr.nbytes), dtype=np.uint8)
        a, c, u, live = self.a, self.c, self.u, self.live
        a[D] = arr.fsize[D]
        c[D] = 0
        u[D] = _POPCOUNT[arr.Prows[D] & Arow].sum(axis=1)
        live[D] = True
        expect = self.expectation(D, t)
        cap = t + 1
        A_child = 0
        e_mask = A_parent
        while e_mask:
            low = e_mask & -e_mask
            e = low.bit_length() - 1
            e_mask ^= low
            fids = arr.Fids[arr.Fptr[e]:arr.Fptr[e + 1]]
            fids = fids[live[fids]]
            pids = arr.Pids[arr.Pptr[e]:arr.Pptr[e + 1]]
            pids = pids[live[pids]]
            if not len(fids) and not len(pids):
                continue
            diff = [0]
            if len(fids):
                codes = np.stack([a[fids] - 1, c[fids], u[fids]], axis=1)
                diff = self._accumulate(diff, codes, 1, t, _basis)
            if len(pids):
                codes = np.stack([a[pids], c[pids], u[pids]], axis=1)
                diff = self._accumulate(diff, codes, 1, t, _p_touch)
            sign, bits = poly_sign(diff, self.params.point, self.start_bits, self.max_bits)
            if bits > self.start_bits:
                self.escalations.append(f"precision {where} edge {e} bits {bits}")
            if sign > 0:
                A_child |= low
                a[fids] -= 1
                c[pids] = np.minimum(c[pids] + 1, cap)
            else:
                live[fids] = False
            u[pids] -= 1
        ok = live[D]
        good = c[D] <= t
        well, poor, passive = D[ok & good], D[ok & ~good], D[~ok]
        live[D] = False
        return A_child, well, poor, passive, expect


def _p_touch(a, c, u, t):
    # in: (a, c+1, u-1); out: (a, c, u-1)
    return _padd(list(_basis(a, c + 1, u - 1, t)), _basis(a, c, u - 1, t), -1)


def _as_collection(D, floor_m: int = 0) -> PairCollection:
    if isinstance(D, PairCollection) and D.m >= floor_m:
        return D
    D = list(D)
    m = max([floor_m] + [max(pr.P.bit_length(), pr.F.bit_length()) for pr in D])
    return PairCollection.from_pairs(m, D)


def derandomize_child(D, A_parent: int, d: int, params: RpcParams,
                      start_bits: int = DEFAULT_START_BITS, max_bits: int = DEFAULT_MAX_BITS):
    """Fix one depth-``d`` child of a node removing ``A_parent``.

    ``D`` holds the pairs passive at every earlier sibling. Edges of
    ``A_parent`` are decided in increasing id order; an edge joins ``A_child``
    only if that strictly raises the conditional expectation. Returns
    ``(A_child, D_child)`` with ``D_child`` the pairs well separated at the
    child.
    """
    pc = _as_collection(D, A_parent.bit_length())
    ids = np.arange(len(pc))
    solver = _ChildSolver(pc, params, start_bits, max_bits)
    A_child, well, _poor, _passive, _e = solver.solve(ids, A_parent, d)
    return A_child, [pc[i] for i in well.tolist()]


def derandomize_forest(g: Graph, pairs: PairCollection, params: RpcParams,
                       start_bits: int = DEFAULT_START_BITS, max_bits: int = DEFAULT_MAX_BITS,
                       K_max: int | None = None) -> RpcForest:
    """Deterministic forest covering every pair of ``pairs``.

    Trees are added until every pair is handled, i.e. reaches the workset
    of a leaf. The result carries a :class:`DerandAudit` as ``forest.audit``.
    """
    if params.mode != "det":
        raise ConfigError("derandomize_forest needs det parameters")
    h, alpha = params.h, params.alpha
    N = len(pairs)
    bound = det_tree_bound(h, N) if K_max is None else K_max
    audit = DerandAudit(N, bound)
    full = g.all_edges
    if N == 0:
        tree = [[full] * alpha ** d for d in range(h + 1)]
        forest = forest_from_masks(g, params, [tree])
        audit.handled_by = np.zeros(0, dtype=np.int64)
        forest.audit = audit
        return forest

    solver = _ChildSolver(pairs, params, start_bits, max_bits, audit.escalations)
    nid = {(d, i): k for d, i, _p, k in _preorder(alpha, h)}
    handled_by = np.full(N, -1, dtype=np.int64)
    remaining = np.arange(N)
    trees = []
    while len(remaining):
        ti = len(trees)
        if ti >= bound:
            raise InvariantError(
                f"{len(remaining)} of {N} pairs unhandled after K_max = {bound} trees; "
                f"first unhandled: {pairs[int(remaining[0])]}"
            )
        masks = [[0] * alpha ** d for d in range(h + 1)]
        masks[0][0] = full
        done = []

        def node(d, i, Dx):
            D = Dx
            sum_dy = 0
            for j in range(alpha):
                ci = i * alpha + j
                where = f"tree {ti} node {nid[d + 1, ci]}"
                A_y, well, poor, passive, expect = solver.solve(D, masks[d][i], d + 1, where)
                masks[d + 1][ci] = A_y
                audit.children.append(
                    ChildRecord(ti, nid[d, i], j, len(D), len(well), len(poor), expect, alpha))
                sum_dy += len(well)
                if len(well):
                    if d + 1 == h:
                        done.append(well)
                    else:
                        node(d + 1, ci, well)
                D = passive
            audit.nodes.append(NodeRecord(ti, nid[d, i], len(Dx), sum_dy))

        node(0, 0, remaining)
        trees.append(masks)
        if not done:
            raise InvariantError(f"tree {ti} handled no pair; {len(remaining)} remain")
        got = np.concatenate(done)
        handled_by[got] = ti
        remaining = remaining[handled_by[remaining] < 0]

    audit.trees_used = len(trees)
    audit.handled_by = handled_by
    for r in audit.nodes:
        if not r.retention_ok:
            log.warning("workset retention bound violated: %s", r.line())
    forest = forest_from_masks(g, params, trees)
    forest.audit = audit
    return forest


def build_det(g: Graph, f: int, L: int, budget: int = DEFAULT_BUDGET,
              start_bits: int = DEFAULT_START_BITS, max_bits: int = DEFAULT_MAX_BITS) -> RpcForest:
    """Enumerate pairs for ``(g, f, L)`` and derandomize a forest for them."""
    params = derive_params(f, L, max(g.n, 2), "det")
    pairs = enumerate_pairs(g, f, L, budget)
    return derandomize_forest(g, pairs, params, start_bits, max_bits)
