import itertools
import random

import pytest

from rpcover.cli import random_graph
from rpcover.graph import Graph


@pytest.fixture
def tri():
    """s=0, a=1, t=2: s->a (1), a->t (1), s->t (5)."""
    return Graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 5)])


@pytest.fixture
def rgraph():
    return random_graph


def simple_paths(g, avoid, s, t):
    """Every simple s-t path in g - avoid as (weight, edge ids)."""
    out = []

    def walk(v, seen, w, seq):
        if v == t:
            out.append((w, tuple(seq)))
            return
        for tail, head, wt, eid in g.out_arcs[v]:
            if avoid >> eid & 1 or head in seen:
                continue
            seen.add(head)
            seq.append(eid)
            walk(head, seen, w + wt, seq)
            seq.pop()
            seen.discard(head)

    walk(s, {s}, 0, [])
    return out


def brute_distance(g, avoid, s, t, L=None):
    best = None
    for w, seq in simple_paths(g, avoid, s, t):
        if L is not None and len(seq) > L:
            continue
        if best is None or w < best:
            best = w
    return float("inf") if best is None else best


def brute_label(g, avoid, s, t):
    """(distance, min hops among shortest) or None."""
    paths = simple_paths(g, avoid, s, t)
    if not paths:
        return None
    return min((w, len(seq)) for w, seq in paths)


def failure_sets(m, f):
    for k in range(f + 1):
        for combo in itertools.combinations(range(m), k):
            yield sum(1 << e for e in combo)


def small_graph(seed, n=None, m=None, directed=True):
    rng = random.Random(seed)
    n = n or rng.randint(2, 6)
    cap = n * (n - 1) if directed else n * (n - 1) // 2
    m = min(cap, m if m is not None else rng.randint(0, cap))
    return random_graph(n, m, 1, 5, directed, seed)
