"""
Deterministic covering on a small graph
=======================================

Build a deterministic (L, f) replacement path covering, look at one query,
and compare the distance estimate with the true replacement distance.
"""

from rpcover import build_det, distance_estimate, query, replacement_distance, verify_exhaustive
from rpcover.cli import random_graph
from rpcover.derand import enumerate_pairs

# A random weighted digraph: 10 vertices, 18 arcs, weights in [1, 10].
g = random_graph(10, 18, 1, 10, True, seed=4)
f, L = 2, 4

# Every (shortest path, failure set) pair the forest must separate.
pairs = enumerate_pairs(g, f, L)
print(f"{len(pairs)} path/failure pairs to handle")

# Trees are added until each pair reaches a leaf that removes F and keeps P.
forest = build_det(g, f, L)
p = forest.params
print(f"h={p.h} alpha={p.alpha} trees={forest.num_trees} (bound {forest.audit.K_max})")
print(f"covering value {forest.covering_value}")
print(f"every internal node kept at least 2/11 of its workset: {forest.audit.retention_ok}")

# %%
# One query: fail two edges and collect the selected subgraphs.
F = [0, 5]
res = query(forest, F)
print(f"F={F}: {len(res)} subgraphs selected, all avoid F: {res.is_sound(sum(1 << e for e in F))}")

for s, t in [(0, 3), (2, 7), (5, 1)]:
    est = distance_estimate(forest, g, s, t, F)
    true = replacement_distance(g, s, t, F)
    print(f"  d({s},{t}) avoiding F: estimate {est}, exact {true}")

# %%
# Exhaustive check over every |F| <= f and every ordered pair.
rep = verify_exhaustive(g, forest, f, L)
print(rep.text())
