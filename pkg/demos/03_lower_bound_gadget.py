"""
Lower-bound gadget
==================

Leaves of the layered comb tree each have a failure set under which the
root-to-leaf path plus the sink edge is the only shortest route. Any valid
covering must spend a distinct subgraph on every leaf.
"""

from rpcover import build_det, build_gadget, certify_rpc_against_gadget, check_unique_replacement
from rpcover.gadget import leaf_count_bound, lower_bound_value

L, f = 5, 2
gd = build_gadget(L, f)
print(f"gadget L={L} f={f}: n={gd.graph.n} m={gd.graph.m}, {len(gd.leaves)} leaves")
print(f"leaf-count bound {leaf_count_bound(L, f)}, lower bound value {lower_bound_value(L, f, gd.graph.n)}")

for leaf in gd.leaves:
    ok = check_unique_replacement(gd, leaf)
    print(f"  spine {leaf.spine!s:12s} |F_x|={leaf.F.bit_count()} unique={ok}")

# %%
# A deterministic covering with hop cutoff L+1 must dedicate a subgraph per leaf.
forest = build_det(gd.graph, f, L + 1)
rep = certify_rpc_against_gadget(gd, forest)
print(rep.text())
