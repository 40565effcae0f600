"""Ground-truth checks of a subgraph family against the covering definition.

Both checks rely on distances only. For failure set ``F`` and pair
``(s, t)`` let ``d = d(s, t, F)``. An arc ``u -> v`` of ``G - F`` is *tight*
for ``(s, t)`` when ``d(s, u) + w + d(v, t) == d``; the ``s``-``t`` paths of
weight ``d`` are exactly the tight-arc paths. A selected subgraph
``G - A_x`` with ``F`` contained in ``A_x`` therefore reaches ``t`` at cost
``d`` within ``L`` hops iff a BFS over tight arcs outside ``A_x`` does.
Selected subgraphs that still contain an ``F`` edge are reported and
checked with a direct hop-bounded Bellman-Ford instead.
"""

from __future__ import annotations

import random
import time
from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

from .errors import CapacityError, ConfigError, SamplingError
from .forest import RpcForest, _check_graph, query
from .graph import Graph, hop_bounded_distance, shortest_path_labels

DEFAULT_F_BUDGET = 2_000_000

DIRTY = "dirty-subgraph"
MISSING = "missing-path"


@dataclass(frozen=True, order=True)
class Violation:
    F: tuple
    s: int | None
    t: int | None
    kind: str

    def line(self) -> str:
        F = ",".join(map(str, self.F)) or "-"
        s = "-" if self.s is None else self.s
        t = "-" if self.t is None else self.t
        return f"violation F={F} s={s} t={t} kind={self.kind}"


@dataclass
class VerificationReport:
    mode: str
    checked_query_count: int = 0
    failure_sets: int = 0
    violations: list = field(default_factory=list)
    elapsed: float = 0.0
    max_selected: int = 0
    total_selected: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def mean_selected(self) -> float:
        return self.total_selected / self.failure_sets if self.failure_sets else 0.0

    def text(self) -> str:
        head = (f"verification {self.mode}: {self.checked_query_count} (F,s,t) checks over "
                f"{self.failure_sets} failure sets, {len(self.violations)} violations, "
                f"{self.elapsed:.2f}s")
        return "\n".join([head] + [v.line() for v in self.violations])

    def records(self) -> str:
        lines = [f"mode={self.mode} checked={self.checked_query_count} failure_sets={self.failure_sets} "
                 f"violations={len(self.violations)} max_selected={self.max_selected} "
                 f"elapsed={self.elapsed:.6f} ok={int(self.ok)}"]
        lines += [v.line() for v in self.violations]
        return "\n".join(lines)


class _FailureView:
    """Distances and tight arcs of ``G - F``, computed lazily per source."""

    def __init__(self, g: Graph, F: int):
        self.g, self.F = g, F
        self.arcs = [a for a in g.arcs if not F >> a[3] & 1]
        self._fwd: dict = {}
        self._bwd: dict = {}

    def fwd(self, s):
        lab = self._fwd.get(s)
        if lab is None:
            lab = self._fwd[s] = shortest_path_labels(self.g, self.F, s)
        return lab

    def bwd(self, t):
        lab = self._bwd.get(t)
        if lab is None:
            lab = self._bwd[t] = shortest_path_labels(self.g, self.F, t, reverse=True)
        return lab

    def tight(self, s, t):
        """``(d, tight arcs, tight eid mask)``; ``d`` is the oracle label of ``t``."""
        fs, bt = self.fwd(s), self.bwd(t)
        dt = fs[t]
        arcs, mask = [], 0
        for a in self.arcs:
            lu, lv = fs[a[0]], bt[a[1]]
            if lu is not None and lv is not None and lu[0] + a[2] + lv[0] == dt[0]:
                arcs.append(a)
                mask |= 1 << a[3]
        return dt, arcs, mask


def _tight_reach(arcs, A: int, s: int, t: int, L: int) -> bool:
    adj: dict = {}
    for tail, head, _w, eid in arcs:
        if not A >> eid & 1:
            adj.setdefault(tail, []).append(head)
    seen = {s: 0}
    q = deque([s])
    while q:
        v = q.popleft()
        dv = seen[v]
        if v == t:
            return True
        if dv == L:
            continue
        for u in adj.get(v, ()):
            if u not in seen:
                seen[u] = dv + 1
                q.append(u)
    return False


def _check_triple(g, view, leaves, s, t, L):
    """True iff some selected leaf keeps a shortest ``<= L``-hop path.

    ``leaves`` holds ``(mask, clean)`` per selected subgraph.
    """
    dt, arcs, tmask = view.tight(s, t)
    for A, clean in leaves:
        if clean:
            if not tmask & A or _tight_reach(arcs, A, s, t, L):
                return True
        elif hop_bounded_distance(g, A, s, t, L) == dt[0]:
            return True
    return False


def _order(v: Violation):
    return len(v.F), v.F, -1 if v.s is None else v.s, -1 if v.t is None else v.t, v.kind


def _pairs(g: Graph):
    n = g.n
    if g.directed:
        return [(s, t) for s in range(n) for t in range(n) if s != t]
    return [(s, t) for s in range(n) for t in range(s + 1, n)]


def _selected(forest, F, report):
    res = query(forest, F)
    masks = res.masks()
    dirty = [A for A in masks if F & ~A]
    report.failure_sets += 1
    report.total_selected += len(masks)
    report.max_selected = max(report.max_selected, len(masks))
    return [(A, not F & ~A) for A in masks], bool(dirty)


def verify_exhaustive(g: Graph, forest: RpcForest, f: int, L: int,
                      budget: int = DEFAULT_F_BUDGET) -> VerificationReport:
    """Check both covering properties for every ``|F| <= f`` and every pair."""
    _check_graph(forest, g)
    need = sum(comb(g.m, i) for i in range(f + 1))
    if need > budget:
        raise CapacityError(f"exhaustive check needs {need} failure sets, budget is {budget}",
                            required=need, budget=budget)
    start = time.perf_counter()
    report = VerificationReport("exhaustive")
    pairs = _pairs(g)
    for size in range(f + 1):
        for combo in combinations(range(g.m), size):
            F = sum(1 << e for e in combo)
            leaves, dirty = _selected(forest, F, report)
            if dirty:
                report.violations.append(Violation(combo, None, None, DIRTY))
            view = _FailureView(g, F)
            for s, t in pairs:
                lab = view.fwd(s)[t]
                if lab is None or lab[1] > L:
                    continue
                report.checked_query_count += 1
                if not _check_triple(g, view, leaves, s, t, L):
                    report.violations.append(Violation(combo, s, t, MISSING))
    report.violations.sort(key=_order)
    report.elapsed = time.perf_counter() - start
    return report


def _random_failure_set(rng: random.Random, m: int, f: int, weights) -> tuple:
    size = rng.choices(range(len(weights)), weights=weights)[0]
    return tuple(sorted(rng.sample(range(m), size)))


def verify_statistical(g: Graph, forest: RpcForest, f: int, L: int, samples: int, seed: int,
                       max_draws: int | None = None) -> VerificationReport:
    """Spot-check ``samples`` uniform eligible triples ``(F, s, t)``.

    A triple is eligible when ``t`` has a shortest path from ``s`` in
    ``G - F`` with at most ``L`` edges; ineligible draws are rejected.
    """
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    _check_graph(forest, g)
    if g.n < 2:
        raise SamplingError("graph has fewer than two vertices")
    rng = random.Random(seed)
    start = time.perf_counter()
    report = VerificationReport("statistical")
    weights = [comb(g.m, i) for i in range(min(f, g.m) + 1)]
    draws_left = max_draws if max_draws is not None else max(10_000, 100 * samples)
    cache: dict = {}
    while report.checked_query_count < samples:
        if draws_left <= 0:
            raise SamplingError(
                f"only {report.checked_query_count} eligible triples in the draw budget")
        draws_left -= 1
        combo = _random_failure_set(rng, g.m, f, weights)
        s, t = rng.sample(range(g.n), 2)
        if not g.directed and s > t:
            s, t = t, s
        F = sum(1 << e for e in combo)
        view = _FailureView(g, F)
        lab = view.fwd(s)[t]
        if lab is None or lab[1] > L:
            continue
        report.checked_query_count += 1
        hit = cache.get(F)
        if hit is None:
            if len(cache) > 4096:
                cache.clear()
            hit = cache[F] = _selected(forest, F, report)
        leaves, dirty = hit
        if dirty:
            report.violations.append(Violation(combo, s, t, DIRTY))
        if not _check_triple(g, view, leaves, s, t, L):
            report.violations.append(Violation(combo, s, t, MISSING))
    report.violations.sort(key=_order)
    report.elapsed = time.perf_counter() - start
    return report

