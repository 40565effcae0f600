from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpcover.errors import InputError
from rpcover.graph import (
    UNREACHABLE,
    Graph,
    format_graph,
    hop_bounded_distance,
    hop_bounded_distances_batch,
    mask_to_bytes,
    parse_graph,
    replacement_distance,
    shortest_path_min_hops,
)

from conftest import brute_distance, brute_label, simple_paths, small_graph


def test_unique_shortest_path(tri):
    r = shortest_path_min_hops(tri, 0, 0, 2)
    assert (r.distance, r.hops, r.edge_sequence) == (2, 2, (0, 1))


def test_avoid_switches_to_direct_edge(tri):
    r = shortest_path_min_hops(tri, {0}, 0, 2)
    w, seq = min(simple_paths(tri, 1, 0, 2))
    assert (r.distance, r.hops, r.edge_sequence) == (w, len(seq), seq) == (5, 1, (2,))


def test_unreachable_without_out_edges():
    g = Graph(2, [(1, 0, 1)])
    assert shortest_path_min_hops(g, 0, 0, 1) is None
    assert replacement_distance(g, 0, 1, 0) == UNREACHABLE


def test_invalid_vertex(tri):
    with pytest.raises(InputError):
        shortest_path_min_hops(tri, 0, 0, 7)


def test_hop_bounded_examples(tri):
    path = Graph(3, [(0, 1, 1), (1, 2, 1)])
    assert hop_bounded_distance(path, 0, 0, 2, 1) == UNREACHABLE
    assert hop_bounded_distance(path, 0, 0, 2, 2) == 2
    assert hop_bounded_distance(tri, 0, 0, 2, 1) == brute_distance(tri, 0, 0, 2, 1) == 5


def test_replacement_distance_examples(tri):
    assert replacement_distance(tri, 0, 2, 0) == 2
    assert replacement_distance(tri, 0, 2, {2}) == brute_distance(tri, 4, 0, 2) == 2
    assert replacement_distance(tri, 0, 2, {0, 2}) == UNREACHABLE


def test_min_hops_tie_break():
    # two shortest paths of weight 2: one with 2 hops, one direct
    g = Graph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 2)])
    r = shortest_path_min_hops(g, 0, 0, 2)
    assert r.edge_sequence == (2,)


def test_smallest_edge_id_predecessor():
    g = Graph(4, [(0, 2, 1), (0, 1, 1), (1, 3, 1), (2, 3, 1)])
    assert shortest_path_min_hops(g, 0, 0, 3).edge_sequence == (1, 2)


def test_undirected_edge_shared_id():
    g = Graph(2, [(0, 1, 3)], directed=False)
    assert replacement_distance(g, 1, 0, 0) == 3
    assert replacement_distance(g, 1, 0, {0}) == UNREACHABLE


def test_weights_validated():
    with pytest.raises(InputError):
        Graph(2, [(0, 1, 0)])
    with pytest.raises(InputError):
        Graph(2, [(0, 1, -1)])
    assert Graph(2, [(0, 1, 0)], allow_zero=True).m == 1
    g = Graph(2, [(0, 1, Fraction(1, 3))])
    assert g.edges[0].weight == Fraction(1, 3)


def test_text_round_trip():
    g = Graph(3, [(0, 1, 2), (1, 2, Fraction(3, 2))], directed=False)
    text = format_graph(g)
    assert text.startswith("graph 3 2 undirected")
    assert parse_graph(text) == g
    assert parse_graph("# comment\n" + text) == g


@pytest.mark.parametrize("text", [
    "",
    "graph 2 1\n0 0 1 1",
    "graph 2 1 directed\n0 0 1 0",
    "graph 2 1 directed\n1 0 1 1",
    "graph 2 2 directed\n0 0 1 1",
    "graph 2 1 directed\n0 0 5 1",
    "graph 2 1 directed\n0 0 1 x",
])
def test_parse_errors(text):
    with pytest.raises(InputError):
        parse_graph(text)


def test_zero_weight_opt_in():
    assert parse_graph("graph 2 1 directed\n0 0 1 0", allow_zero=True).m == 1


graphs = st.builds(small_graph, st.integers(0, 10_000), directed=st.booleans())


@settings(max_examples=80, deadline=None)
@given(graphs, st.data())
def test_oracles_agree_with_brute_force(g, data):
    F = data.draw(st.integers(0, (1 << g.m) - 1)) if g.m else 0
    s = data.draw(st.integers(0, g.n - 1))
    t = data.draw(st.integers(0, g.n - 1))
    r = shortest_path_min_hops(g, F, s, t)
    lab = brute_label(g, F, s, t)
    if lab is None:
        assert r is None
        assert replacement_distance(g, s, t, F) == UNREACHABLE
        return
    assert (r.distance, r.hops) == lab
    assert replacement_distance(g, s, t, F) == r.distance
    # the returned path is a simple s-t walk in g - F
    v, seen, w = s, {s}, 0
    for eid in r.edge_sequence:
        assert not F >> eid & 1
        e = g.edges[eid]
        nxt = e.head if e.tail == v else e.tail
        assert v in (e.tail, e.head) and (e.tail == v or not g.directed)
        assert nxt not in seen
        seen.add(nxt)
        v, w = nxt, w + e.weight
    assert v == t and w == r.distance and len(r.edge_sequence) == r.hops
    assert shortest_path_min_hops(g, F, s, t) == r


@settings(max_examples=80, deadline=None)
@given(graphs, st.data())
def test_hop_bounded_properties(g, data):
    F = data.draw(st.integers(0, (1 << g.m) - 1)) if g.m else 0
    s = data.draw(st.integers(0, g.n - 1))
    t = data.draw(st.integers(0, g.n - 1))
    prev = UNREACHABLE
    for L in range(0, g.n + 1):
        d = hop_bounded_distance(g, F, s, t, L)
        assert d == brute_distance(g, F, s, t, L)
        assert d <= prev
        prev = d
    assert hop_bounded_distance(g, F, s, t, max(g.n - 1, 0)) == replacement_distance(g, s, t, F)
    bigger = F | data.draw(st.integers(0, (1 << g.m) - 1)) if g.m else F
    assert replacement_distance(g, s, t, bigger) >= replacement_distance(g, s, t, F)


@settings(max_examples=40, deadline=None)
@given(graphs, st.data())
def test_batch_matches_single(g, data):
    k = data.draw(st.integers(1, 4))
    masks = [data.draw(st.integers(0, (1 << g.m) - 1)) if g.m else 0 for _ in range(k)]
    rows = np.array([np.frombuffer(mask_to_bytes(mk, g.nbytes), dtype=np.uint8) for mk in masks])
    s = data.draw(st.integers(0, g.n - 1))
    L = data.draw(st.integers(0, g.n))
    got = hop_bounded_distances_batch(g, rows, s, L)
    for mk, dist in zip(masks, got):
        assert dist == [hop_bounded_distance(g, mk, s, t, L) for t in range(g.n)]


def test_batch_rational_weights():
    g = Graph(3, [(0, 1, Fraction(1, 2)), (1, 2, Fraction(1, 3)), (0, 2, 1)])
    rows = np.zeros((1, g.nbytes), dtype=np.uint8)
    assert hop_bounded_distances_batch(g, rows, 0, 2)[0][2] == Fraction(5, 6)
