import pytest

from rpcover.errors import ConfigError, InputError
from rpcover.forest import flat_family
from rpcover.gadget import (
    build_gadget,
    build_inner_tree,
    certify_rpc_against_gadget,
    check_unique_replacement,
    leaf_count_bound,
    lower_bound_value,
    read_gadget,
    write_gadget,
)


def test_inner_tree_shape():
    t = build_inner_tree(3, 5)
    assert t.spine_edges == [(2, 1, 0), (1, 0, 0)]
    assert t.leaf_edges == [(0, 3, 5), (1, 4, 10), (2, 5, 15)]
    g = t.graph()
    assert g.n == 6 and g.m == 5
    with pytest.raises(InputError):
        build_inner_tree(0, 1)


@pytest.fixture(scope="module")
def g43():
    return build_gadget(4, 3)


def test_gadget_43_leaves(g43):
    assert len(g43.leaves) >= 7
    assert len(g43.leaves) >= leaf_count_bound(4, 3) == 7
    spines = {leaf.spine for leaf in g43.leaves}
    assert (4,) in spines and (2, 1, 1) in spines
    fig = next(leaf for leaf in g43.leaves if leaf.spine == (2, 1, 1))
    assert fig.F.bit_count() == 2
    assert g43.max_failures <= 3


def test_gadget_21():
    gd = build_gadget(2, 1)
    assert len(gd.leaves) == 2
    assert [leaf.F.bit_count() for leaf in gd.leaves] == [0, 1]


@pytest.mark.parametrize("L,f", [(4, 3), (5, 2), (2, 1), (3, 3)])
def test_every_leaf_unique(L, f):
    gd = build_gadget(L, f)
    for leaf in gd.leaves:
        assert len(leaf.path) == L + 1
        assert leaf.F.bit_count() <= f
        assert not leaf.path_mask & leaf.F
        assert check_unique_replacement(gd, leaf)


def test_empty_failure_picks_first_leaf(g43):
    winners = [x for x in range(len(g43.leaves)) if check_unique_replacement(g43, x, F=0)]
    assert len(winners) == 1
    leaf = g43.leaves[winners[0]]
    assert leaf.level == 1 and leaf.spine == (4,)


def test_failures_are_needed(g43):
    broken = 0
    for leaf in g43.leaves:
        for e in leaf.failure_ids:
            if not check_unique_replacement(g43, leaf, F=leaf.F & ~(1 << e)):
                broken += 1
    assert broken > 0


@pytest.mark.parametrize("L,f,n,want", [(2, 1, 10 ** 6, 1), (5, 2, 100, 4), (4, 3, 2, 2)])
def test_lower_bound_value(L, f, n, want):
    assert lower_bound_value(L, f, n) == want


def test_lower_bound_value_rejects():
    with pytest.raises(InputError):
        lower_bound_value(1, 1, 5)


def test_power_set_certifies():
    gd = build_gadget(2, 1)
    m = gd.graph.m
    forest = flat_family(gd.graph, [[e] for e in range(m)] + [[]], 1, 3)
    rep = certify_rpc_against_gadget(gd, forest)
    assert rep.ok and "certificate PASS" in rep.text()


def test_too_small_family_fails(g43):
    # one subgraph per leaf minus one cannot be injective
    sets = [leaf.F for leaf in g43.leaves[:-1]]
    forest = flat_family(g43.graph, sets, 3, 5)
    rep = certify_rpc_against_gadget(g43, forest)
    assert not rep.ok and rep.missing


def test_certify_guards(g43):
    forest = flat_family(g43.graph, [[]], 3, 5)
    with pytest.raises(ConfigError):
        certify_rpc_against_gadget(g43, forest, cutoff=4)
    with pytest.raises(ConfigError):
        certify_rpc_against_gadget(g43, flat_family(g43.graph, [[]], 3, 4))
    with pytest.raises(ConfigError):
        certify_rpc_against_gadget(g43, flat_family(g43.graph, [[]], 1, 5))


def test_round_trip(tmp_path, g43):
    write_gadget(g43, tmp_path / "gd")
    back = read_gadget(tmp_path / "gd")
    assert back.leaves == g43.leaves
    assert back.graph.fingerprint == g43.graph.fingerprint
    assert (back.L, back.f, back.s, back.v) == (g43.L, g43.f, g43.s, g43.v)
