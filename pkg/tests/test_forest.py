import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rpcover.derand import build_det
from rpcover.errors import ConfigError, FormatError, QueryError
from rpcover.forest import (
    build_flat_baseline,
    build_randomized,
    deserialize,
    distance_estimate,
    flat_family,
    forest_from_masks,
    query,
    serialize,
)
from rpcover.graph import Graph, replacement_distance
from rpcover.params import RpcParams, derive_params

from conftest import small_graph


@pytest.fixture(scope="module")
def g20():
    return small_graph(7, n=20, m=40)


@pytest.fixture(scope="module")
def rand20(g20):
    return build_randomized(g20, derive_params(2, 32, g20.n, "rand-improved"), seed=42)


@pytest.fixture(scope="module")
def small20(g20):
    return build_randomized(g20, derive_params(2, 32, g20.n, "rand-improved").with_K(40), seed=42)


def test_edgeless_graph():
    g = Graph(3, [])
    forest = build_randomized(g, derive_params(1, 2, 3, "rand-improved").with_K(3), seed=0)
    assert all((lvl == 0).all() for lvl in forest.levels)
    assert len(query(forest, 0)) == 3


def test_seed_determinism(g20, small20):
    again = build_randomized(g20, small20.params, seed=42)
    assert again == small20
    assert serialize(again) == serialize(small20)
    assert build_randomized(g20, small20.params, seed=43) != small20


def test_nesting_and_sizes(rand20):
    p = rand20.params
    assert rand20.check_nesting()
    assert rand20.covering_value == p.K * p.alpha ** p.h
    assert rand20.leaf_rows().shape[0] == p.K * p.alpha ** p.h


def test_empty_failure_set_takes_leftmost_leaves(rand20):
    res = query(rand20, [])
    assert len(res) == rand20.params.K
    assert (res.leaves == 0).all()


def _hand_tree(masks):
    g = Graph(2, [(0, 1, 1), (1, 0, 1)])
    params = RpcParams("det", 1, 2, 1, len(masks), 1, 2, p_num=1, p_den=4)
    return g, forest_from_masks(g, params, [[[0b11], masks]])


def test_first_containing_child():
    g, forest = _hand_tree([0b01, 0b10])
    res = query(forest, {1})
    assert list(res) == [(0, 1)]
    assert res.is_sound(0b10)


def test_no_child_contains_failure():
    g, forest = _hand_tree([0b01, 0b01])
    assert len(query(forest, {1})) == 0


def test_too_many_failures(rand20):
    with pytest.raises(QueryError):
        query(rand20, [0, 1, 2])
    with pytest.raises(QueryError):
        query(rand20, [999])


@settings(max_examples=40, deadline=None)
@given(st.sets(st.integers(0, 39), max_size=2))
def test_query_soundness(rand20, F):
    res = query(rand20, F)
    mask = sum(1 << e for e in F)
    assert res.is_sound(mask)
    assert all(not mask & ~A for A in res.masks())
    assert len(res) <= rand20.params.K


def test_round_trip(small20, g20):
    data = serialize(small20)
    back = deserialize(data, g20)
    assert back == small20
    assert serialize(back) == data


def test_round_trip_flat(g20):
    flat = build_flat_baseline(g20, 2, 4, c=1.0, seed=3)
    assert deserialize(serialize(flat), g20) == flat


def test_tampered_header(small20, g20):
    data = serialize(small20)
    with pytest.raises(FormatError):
        deserialize(data.replace(b"rpcv1", b"rpcv2", 1), g20)
    with pytest.raises(FormatError):
        deserialize(b"rpcv1 det 2\n", g20)


def test_truncation(small20, g20):
    data = serialize(small20)
    lines = data.splitlines(keepends=True)
    with pytest.raises(FormatError):
        deserialize(b"".join(lines[:-1]), g20)
    with pytest.raises(FormatError):
        deserialize(data[: len(data) // 2], g20)


def test_fingerprint_mismatch(small20):
    other = small_graph(8, n=20, m=40)
    with pytest.raises(FormatError):
        deserialize(serialize(small20), other)


def test_tampered_records_rejected():
    g, forest = _hand_tree([0b01, 0b10])
    lines = serialize(forest).decode().splitlines()
    for idx, bad in [(1, "node 0 -1 1 0"), (2, "node 1 0 2 1"), (2, "node 1 0 1 9"), (3, "node 7 0 0")]:
        tampered = list(lines)
        tampered[idx] = bad
        with pytest.raises(FormatError):
            deserialize(("\n".join(tampered) + "\n").encode(), g)


def test_reinsert_must_be_removed_at_parent():
    g = Graph(2, [(0, 1, 1), (1, 0, 1)])
    params = RpcParams("det", 1, 2, 2, 1, 1, 2, p_num=1, p_den=4)
    forest = forest_from_masks(g, params, [[[0b11], [0b01], [0b00]]])
    lines = serialize(forest).decode().splitlines()
    assert lines[2] == "node 1 0 1 1" and lines[3] == "node 2 1 1 0"
    lines[3] = "node 2 1 1 1"
    with pytest.raises(FormatError):
        deserialize(("\n".join(lines) + "\n").encode(), g)


def test_flat_L1_removes_everything(g20):
    flat = build_flat_baseline(g20, 1, 1, c=1.0, seed=0)
    full = np.frombuffer((g20.all_edges).to_bytes(g20.nbytes, "little"), dtype=np.uint8)
    assert (flat.removal == full).all()


def test_flat_size_and_reproducible(g20):
    a = build_flat_baseline(g20, 2, 4, c=1.0, seed=5)
    assert a.covering_value == math.ceil(2 * 4 ** 2 * math.log(20))
    assert a == build_flat_baseline(g20, 2, 4, c=1.0, seed=5)
    with pytest.raises(ConfigError):
        build_flat_baseline(g20, 2, 4, c=0, seed=5)


def test_flat_removal_fraction(g20):
    L = 5
    flat = build_flat_baseline(g20, 2, L, c=1.0, seed=11)
    bits = np.unpackbits(flat.removal, axis=1, bitorder="little")[:, : g20.m]
    n = bits.size
    se = math.sqrt((1 / L) * (1 - 1 / L) / n)
    assert abs(bits.mean() - 1 / L) <= 3 * se


def test_leaf_frequency_small():
    g = small_graph(1, n=6, m=10)
    params = derive_params(2, 32, 6, "rand-improved").with_K(800)
    forest = build_randomized(g, params, seed=9)
    first = np.unpackbits(forest.levels[-1][:, 0, :], axis=1, bitorder="little")[:, 0]
    p = 2 / 32
    assert abs(first.mean() - p) <= 3 * math.sqrt(p * (1 - p) / len(first))


def test_flat_family_wraps_sets(tri):
    fam = flat_family(tri, [[], [0], [0, 1, 2]], 1, 2)
    assert fam.covering_value == 3
    assert [i for i, _ in query(fam, [0])] == [1, 2]


def test_estimate_on_triangle(tri):
    forest = build_det(tri, 1, 2)
    assert distance_estimate(forest, tri, 0, 2, [0]) == 5
    assert distance_estimate(forest, tri, 0, 2, []) == 2
    assert distance_estimate(forest, tri, 0, 1, []) == 1


def test_estimate_wrong_graph(tri, rand20):
    with pytest.raises(ConfigError):
        distance_estimate(rand20, tri, 0, 1, [])


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(0, 39), max_size=2), st.integers(0, 19), st.integers(0, 19))
def test_never_underestimates(rand20, g20, F, s, t):
    assert distance_estimate(rand20, g20, s, t, F) >= replacement_distance(g20, s, t, F)


def test_long_paths_overestimate():
    # only a 4-hop route, cutoff 2: estimate stays above the true distance
    g = Graph(5, [(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1)])
    forest = build_flat_baseline(g, 1, 2, c=1.0, seed=0)
    assert distance_estimate(forest, g, 0, 4, []) >= replacement_distance(g, 0, 4, 0)


@settings(max_examples=30, deadline=None)
@given(st.sets(st.integers(0, 39), max_size=2), st.integers(0, 19))
def test_all_target_estimates_match_scalar_route(rand20, g20, F, s):
    from rpcover.forest import distance_estimates
    from rpcover.graph import hop_bounded_distance

    est = distance_estimates(rand20, g20, s, F)
    masks = query(rand20, F).masks()
    for t in range(0, 20, 3):
        want = min((hop_bounded_distance(g20, A, s, t, 32) for A in masks), default=float("inf"))
        assert est[t] == want
