"""
Sampling trees against independent subgraphs
============================================

Both families are randomized. The flat one draws ~ f L^f ln n independent
subgraphs and a query scans all of them; the tree forest hands back at most
one leaf per tree.
"""

import time

import numpy as np

from rpcover import build_flat_baseline, derive_params, query, verify_statistical
from rpcover.cli import random_graph
from rpcover.forest import build_randomized

g = random_graph(20, 40, 1, 10, True, seed=0)
f, L = 2, 32

params = derive_params(f, L, g.n, "rand-improved")
trees = build_randomized(g, params, seed=0)
flat = build_flat_baseline(g, f, L, seed=0)

print(f"trees: K={params.K} h={params.h} alpha={params.alpha} covering value {trees.covering_value}")
print(f"flat:  {flat.covering_value} subgraphs")

# %%
# Subfamily sizes over random failure sets.
rng = np.random.default_rng(1)
for name, fam in [("trees", trees), ("flat", flat)]:
    sizes, t0 = [], time.perf_counter()
    for _ in range(300):
        F = rng.choice(g.m, size=rng.integers(0, f + 1), replace=False).tolist()
        sizes.append(len(query(fam, F)))
    us = 1e6 * (time.perf_counter() - t0) / 300
    print(f"{name:5s} mean |G_F| {np.mean(sizes):8.1f}  max {max(sizes):5d}  {us:8.1f} us/query")

# %%
# Leaf removal frequency for one edge matches f/L.
K = trees.num_trees
freq = np.mean([trees.leaf_mask(i, 0) & 1 for i in range(K)])
print(f"edge 0 removed at leaf 0 in {freq:.4f} of trees, target {f / L:.4f}")

# %%
# Spot check coverage on 500 random (F, s, t).
print(verify_statistical(g, trees, f, L, samples=500, seed=2).text())
