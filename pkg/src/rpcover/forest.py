"""Sampling-tree forests and flat subgraph families.

A forest stores removal sets ``A_x`` (edges *missing* from the subgraph of
node ``x``). In memory each tree is kept level by level: ``levels[d]`` is a
``(K, alpha**d, nbytes)`` uint8 array holding the packed masks of all
depth-``d`` nodes of all ``K`` trees, children of node ``i`` at indices
``i*alpha .. i*alpha + alpha - 1`` in creation order. Flat families keep a
single ``(N, nbytes)`` array.

The on-disk format is line oriented::

    rpcv1 <mode> <f> <L> <h> <alpha> <K> <n> <m> <graph-hash> <seed-or-DET>
    node <id> <parent-id|-1> <reinsert-count> <edge ids reinserted vs parent>
    ...

with node ids in preorder within each tree (a new tree starts at every
``parent == -1`` record). Flat families store ``sub <id> <count> <ids>``
lines listing removed edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, QueryError
from .graph import (
    UNREACHABLE,
    Graph,
    bytes_to_mask,
    hop_bounded_distances_batch,
    mask_ids,
    mask_to_bytes,
)
from .params import RpcParams, derive_params, flat_count

FORMAT_VERSION = "rpcv1"

__all__ = [
    "RpcForest",
    "QueryResult",
    "build_randomized",
    "build_flat_baseline",
    "flat_family",
    "forest_from_masks",
    "query",
    "distance_estimate",
    "distance_estimates",
    "serialize",
    "deserialize",
]


def _pack(bool_rows: np.ndarray, nbytes: int) -> np.ndarray:
    packed = np.packbits(bool_rows, axis=-1, bitorder="little")
    if packed.shape[-1] < nbytes:
        pad = [(0, 0)] * (packed.ndim - 1) + [(0, nbytes - packed.shape[-1])]
        packed = np.pad(packed, pad)
    return packed


def _mask_row(mask: int, nbytes: int) -> np.ndarray:
    return np.frombuffer(mask_to_bytes(mask, nbytes), dtype=np.uint8)


@dataclass(eq=False)
class RpcForest:
    params: RpcParams
    fingerprint: tuple[int, int, str]
    seed: int | None = None
    levels: list[np.ndarray] | None = None
    removal: np.ndarray | None = None
    audit: object = field(default=None, repr=False)

    @property
    def mode(self) -> str:
        return self.params.mode

    @property
    def is_flat(self) -> bool:
        return self.params.mode == "flat-baseline"

    @property
    def num_trees(self) -> int:
        if self.is_flat:
            return len(self.removal)
        return self.levels[0].shape[0]

    @property
    def nbytes(self) -> int:
        return (self.removal if self.is_flat else self.levels[0]).shape[-1]

    @property
    def covering_value(self) -> int:
        """Number of subgraphs in the family."""
        if self.is_flat:
            return len(self.removal)
        return self.num_trees * self.params.alpha ** self.params.h

    def leaf_rows(self) -> np.ndarray:
        """Packed removal sets of every member of the family."""
        if self.is_flat:
            return self.removal
        return self.levels[-1].reshape(-1, self.nbytes)

    def node_mask(self, tree: int, depth: int, index: int) -> int:
        return bytes_to_mask(self.levels[depth][tree, index])

    def leaf_mask(self, tree: int, leaf: int) -> int:
        if self.is_flat:
            return bytes_to_mask(self.removal[tree])
        return bytes_to_mask(self.levels[-1][tree, leaf])

    def _key(self):
        # delta and c only shape K, which is compared directly; they are not persisted
        p = self.params
        return (p.mode, p.f, p.L, p.h, p.alpha, p.K, p.n_ref, p.p_num, p.p_den,
                self.fingerprint, self.seed)

    def __eq__(self, other):
        if not isinstance(other, RpcForest):
            return NotImplemented
        if self._key() != other._key():
            return False
        if self.is_flat:
            return np.array_equal(self.removal, other.removal)
        return len(self.levels) == len(other.levels) and all(
            np.array_equal(a, b) for a, b in zip(self.levels, other.levels)
        )

    def check_nesting(self) -> bool:
        """``A_child`` is a subset of ``A_parent`` everywhere and roots remove all edges."""
        if self.is_flat:
            return True
        alpha = self.params.alpha
        m = self.fingerprint[1]
        full = _mask_row((1 << m) - 1, self.nbytes)
        if not (self.levels[0] == full).all():
            return False
        for d in range(1, len(self.levels)):
            parent = np.repeat(self.levels[d - 1], alpha, axis=1)
            if ((self.levels[d] & ~parent) != 0).any():
                return False
        return True


def _tree_rng(seed: int, tree: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(tree,))))


def build_randomized(g: Graph, params: RpcParams, seed: int) -> RpcForest:
    """Sample ``K`` independent trees; each child keeps each parent edge in
    its removal set with probability ``p``.

    Tree ``i`` draws from its own Philox stream keyed by ``(seed, i)``; the
    depth-``d`` draws form one ``(alpha**d, m)`` block in node order, so
    any tree can be rebuilt on its own.
    """
    if params.mode != "rand-improved":
        raise ConfigError("build_randomized needs rand-improved parameters")
    K, h, alpha, m, nb = params.K, params.h, params.alpha, g.m, g.nbytes
    p = params.p
    levels = [np.empty((K, alpha ** d, nb), dtype=np.uint8) for d in range(h + 1)]
    levels[0][:] = _mask_row(g.all_edges, nb)
    for i in range(K):
        rng = _tree_rng(seed, i)
        A = np.ones((1, m), dtype=bool)
        for d in range(1, h + 1):
            keep = rng.random((alpha ** d, m)) < p
            A = np.repeat(A, alpha, axis=0) & keep
            levels[d][i] = _pack(A, nb)
    return RpcForest(params, g.fingerprint, seed, levels=levels)


def build_flat_baseline(g: Graph, f: int, L: int, n: int | None = None, c: float = 1.0,
                        seed: int = 0) -> RpcForest:
    """``ceil(c f L^f ln n)`` independent subgraphs, each edge removed w.p. ``1/L``."""
    n = g.n if n is None else n
    if c <= 0:
        raise ConfigError("multiplier c must be positive")
    if L < 1:
        raise ConfigError("hop cutoff L must be >= 1")
    count = flat_count(f, L, max(n, 2), c)
    params = RpcParams("flat-baseline", f, L, 1, 1, count, n, c=c, p_num=1, p_den=L)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    removed = rng.random((count, g.m)) < 1.0 / L
    return RpcForest(params, g.fingerprint, seed, removal=_pack(removed, g.nbytes))


def flat_family(g: Graph, removal_sets, f: int, L: int) -> RpcForest:
    """Wrap explicit removal sets (masks or id lists) as a flat family."""
    from .graph import as_mask

    masks = [g.edge_mask(as_mask(r)) for r in removal_sets]
    params = RpcParams("flat-baseline", f, L, 1, 1, len(masks), g.n, p_num=1, p_den=max(L, 1))
    rows = np.array([_mask_row(mk, g.nbytes) for mk in masks], dtype=np.uint8).reshape(len(masks), g.nbytes)
    return RpcForest(params, g.fingerprint, None, removal=rows)


def forest_from_masks(g: Graph, params: RpcParams, trees, seed=None) -> RpcForest:
    """Assemble a tree-mode forest from per-tree level lists of int masks.

    ``trees[i][d]`` is the list of ``alpha**d`` masks at depth ``d``.
    """
    K, h, alpha, nb = len(trees), params.h, params.alpha, g.nbytes
    levels = [np.zeros((K, alpha ** d, nb), dtype=np.uint8) for d in range(h + 1)]
    for i, tree in enumerate(trees):
        if len(tree) != h + 1:
            raise ConfigError(f"tree {i} has {len(tree)} levels, expected {h + 1}")
        for d, masks in enumerate(tree):
            if len(masks) != alpha ** d:
                raise ConfigError(f"tree {i} depth {d}: {len(masks)} nodes, expected {alpha ** d}")
            buf = b"".join(mask_to_bytes(mk, nb) for mk in masks)
            levels[d][i] = np.frombuffer(buf, dtype=np.uint8).reshape(alpha ** d, nb)
    return RpcForest(params.with_K(K), g.fingerprint, seed, levels=levels)


# -- queries ----------------------------------------------------------------


@dataclass
class QueryResult:
    """Selected family members: pairs ``(tree, leaf)`` and their removal sets.

    Flat families report the subgraph index as ``tree`` and leaf 0.
    """

    trees: np.ndarray
    leaves: np.ndarray
    removal: np.ndarray

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(zip(self.trees.tolist(), self.leaves.tolist()))

    def masks(self) -> list[int]:
        return [bytes_to_mask(r) for r in self.removal]

    def is_sound(self, F: int) -> bool:
        """Every selected removal set contains ``F``."""
        if not len(self):
            return True
        Fb = _mask_row(F, self.removal.shape[1])
        return bool(((self.removal & Fb) == Fb).all())


def _failure_row(forest: RpcForest, F) -> tuple[int, np.ndarray]:
    from .graph import as_mask

    F = as_mask(F)
    m = forest.fingerprint[1]
    if F >> m:
        raise QueryError(f"failure edge id out of range 0..{m - 1}")
    if F.bit_count() > forest.params.f:
        raise QueryError(f"|F| = {F.bit_count()} exceeds sensitivity f = {forest.params.f}")
    return F, _mask_row(F, forest.nbytes)


def query(forest: RpcForest, F) -> QueryResult:
    """Collect the subfamily for failure set ``F``.

    Tree modes walk every tree from its root, always entering the first child
    whose removal set contains ``F``; a tree with no such child at some level
    contributes nothing. Flat families are filtered directly.
    """
    F, Fb = _failure_row(forest, F)
    if forest.is_flat:
        ok = ((forest.removal & Fb) == Fb).all(axis=1)
        idx = np.flatnonzero(ok)
        return QueryResult(idx, np.zeros_like(idx), forest.removal[idx])
    alpha, h = forest.params.alpha, forest.params.h
    trees = np.arange(forest.num_trees)
    cur = np.zeros(len(trees), dtype=np.int64)
    kids = np.arange(alpha)
    for d in range(1, h + 1):
        if not len(trees):
            break
        idx = cur[:, None] * alpha + kids
        sub = forest.levels[d][trees[:, None], idx]
        ok = ((sub & Fb) == Fb).all(axis=-1)
        has = ok.any(axis=1)
        first = ok.argmax(axis=1)
        trees, cur = trees[has], idx[has, first[has]]
    if not len(trees):
        empty = np.zeros(0, dtype=np.int64)
        return QueryResult(empty, empty, np.zeros((0, forest.nbytes), dtype=np.uint8))
    return QueryResult(trees, cur, forest.levels[h][trees, cur])


def distance_estimates(forest: RpcForest, g: Graph, s: int, F) -> list:
    """``L``-hop-bounded estimates from ``s`` to every vertex over the subfamily for ``F``."""
    _check_graph(forest, g)
    g.check_vertex(s)
    res = query(forest, F)
    best = [UNREACHABLE] * g.n
    for dist in hop_bounded_distances_batch(g, res.removal, s, forest.params.L):
        best = [min(a, b) for a, b in zip(best, dist)]
    return best


def distance_estimate(forest: RpcForest, g: Graph, s: int, t: int, F):
    """Minimum ``L``-hop-bounded ``s``-``t`` distance over the subfamily for ``F``."""
    g.check_vertex(t)
    return distance_estimates(forest, g, s, F)[t]


def _check_graph(forest: RpcForest, g: Graph):
    if forest.fingerprint != g.fingerprint:
        raise ConfigError("forest was built for a different graph")


# -- serialization ------------------------------------------------------------


def _subtree_sizes(alpha: int, h: int) -> list[int]:
    # size of a subtree rooted at depth d
    return [sum(alpha ** i for i in range(h - d + 1)) for d in range(h + 1)]


def _preorder(alpha: int, h: int):
    """Yield ``(depth, index, parent_preorder_id)`` in preorder."""
    stack = [(0, 0, -1)]
    nid = 0
    while stack:
        d, i, parent = stack.pop()
        yield d, i, parent, nid
        me = nid
        nid += 1
        if d < h:
            for j in range(alpha - 1, -1, -1):
                stack.append((d + 1, i * alpha + j, me))


def _back_bits(forest: RpcForest, tree: int) -> list[np.ndarray]:
    """Per depth, a bool array of the edges each node reinserts vs its parent."""
    m, alpha = forest.fingerprint[1], forest.params.alpha
    out = [np.zeros((1, m), dtype=bool)]
    for d in range(1, len(forest.levels)):
        parent = np.repeat(forest.levels[d - 1][tree], alpha, axis=0)
        back = parent & ~forest.levels[d][tree]
        out.append(np.unpackbits(back, axis=1, bitorder="little", count=m).astype(bool))
    return out


def _id_lists(bits: np.ndarray) -> list[str]:
    rows, cols = np.nonzero(bits)
    counts = np.bincount(rows, minlength=bits.shape[0])
    split = np.split(cols, np.cumsum(counts)[:-1])
    return [f"{len(c)}" + "".join(f" {e}" for e in c.tolist()) for c in split]


def serialize(forest: RpcForest) -> bytes:
    p = forest.params
    n, m, digest = forest.fingerprint
    seed = "DET" if forest.seed is None else str(forest.seed)
    out = [f"{FORMAT_VERSION} {p.mode} {p.f} {p.L} {p.h} {p.alpha} {forest.num_trees} {n} {m} {digest} {seed}"]
    if forest.is_flat:
        bits = np.unpackbits(forest.removal, axis=1, bitorder="little", count=m).astype(bool)
        out += [f"sub {i} {ids}" for i, ids in enumerate(_id_lists(bits))]
    else:
        order = list(_preorder(p.alpha, p.h))
        for tree in range(forest.num_trees):
            ids = [_id_lists(b) for b in _back_bits(forest, tree)]
            out += [f"node {nid} {parent} {ids[d][i]}" for d, i, parent, nid in order]
    return ("\n".join(out) + "\n").encode()


def _params_for(mode, f, L, h, alpha, K, n) -> RpcParams:
    if mode == "det":
        num, den = 1, 2 * L
    elif mode == "rand-improved":
        num, den = f, L
    else:
        num, den = 1, max(L, 1)
    return RpcParams(mode, f, L, h, alpha, K, n, p_num=num, p_den=den)


def deserialize(data: bytes, g: Graph) -> RpcForest:
    try:
        text = data.decode()
    except UnicodeDecodeError as exc:
        raise FormatError("forest file is not text") from exc
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty forest file")
    head = lines[0].split()
    if len(head) != 11 or head[0] != FORMAT_VERSION:
        raise FormatError(f"bad header: expected '{FORMAT_VERSION} <mode> <f> <L> <h> <alpha> <K> <n> <m> <hash> <seed>'")
    mode = head[1]
    try:
        f, L, h, alpha, K, n, m = (int(x) for x in head[2:9])
    except ValueError as exc:
        raise FormatError("non-integer header field") from exc
    digest, seed_tok = head[9], head[10]
    if (n, m, digest) != g.fingerprint:
        raise FormatError("graph fingerprint mismatch")
    try:
        params = _params_for(mode, f, L, h, alpha, K, n)
    except ConfigError as exc:
        raise FormatError(str(exc)) from exc
    seed = None if seed_tok == "DET" else _int(seed_tok)
    body = lines[1:]
    nb = g.nbytes

    if mode == "flat-baseline":
        if len(body) != K:
            raise FormatError(f"expected {K} subgraph records, found {len(body)}")
        rows = np.zeros((K, nb), dtype=np.uint8)
        for i, line in enumerate(body):
            tok = line.split()
            if len(tok) < 3 or tok[0] != "sub" or tok[1] != str(i):
                raise FormatError(f"line {i + 2}: expected 'sub {i} ...'")
            ids = _edge_ids(tok[2], tok[3:], m, i + 2)
            mask = 0
            for e in ids:
                mask |= 1 << e
            rows[i] = _mask_row(mask, nb)
        return RpcForest(params, g.fingerprint, seed, removal=rows)

    order = list(_preorder(alpha, h))
    per_tree = len(order)
    if len(body) != K * per_tree:
        raise FormatError(f"expected {K * per_tree} node records, found {len(body)}")
    levels = [np.zeros((K, alpha ** d, nb), dtype=np.uint8) for d in range(h + 1)]
    full = np.ones(m, dtype=bool)
    for tree in range(K):
        back = [np.zeros((alpha ** d, m), dtype=bool) for d in range(h + 1)]
        for (d, i, parent, nid), line in zip(order, body[tree * per_tree:(tree + 1) * per_tree]):
            lineno = 2 + tree * per_tree + nid
            tok = line.split()
            if len(tok) < 4 or tok[0] != "node":
                raise FormatError(f"line {lineno}: expected a node record")
            if tok[1] != str(nid) or tok[2] != str(parent):
                raise FormatError(f"line {lineno}: node/parent ids do not match preorder layout")
            ids = _edge_ids(tok[3], tok[4:], m, lineno)
            if parent < 0 and ids:
                raise FormatError(f"line {lineno}: root must remove every edge")
            back[d][i, ids] = True
        A = full[None, :]
        levels[0][tree] = _pack(A, nb)
        for d in range(1, h + 1):
            above = np.repeat(A, alpha, axis=0)
            if (back[d] & ~above).any():
                raise FormatError(f"tree {tree}: reinserted edge not removed at parent")
            A = above & ~back[d]
            levels[d][tree] = _pack(A, nb)
    return RpcForest(params, g.fingerprint, seed, levels=levels)


def _edge_ids(count_tok, id_toks, m, lineno) -> list[int]:
    try:
        cnt = int(count_tok)
        ids = [int(x) for x in id_toks]
    except ValueError as exc:
        raise FormatError(f"line {lineno}: malformed record") from exc
    if cnt != len(ids) or any(not 0 <= e < m for e in ids):
        raise FormatError(f"line {lineno}: bad edge list")
    return ids


def _int(tok):
    try:
        return int(tok)
    except ValueError as exc:
        raise FormatError(f"bad seed field {tok!r}") from exc


def rand_forest(g: Graph, f: int, L: int, seed: int, delta=8) -> RpcForest:
    """Convenience: derive rand-improved parameters for ``g`` and build."""
    return build_randomized(g, derive_params(f, L, g.n, "rand-improved", delta=delta), seed)


def expected_subfamily_size(params: RpcParams) -> float:
    """``K / C**h`` with ``C = e/(e-1)``, the typical subfamily size."""
    C = math.e / (math.e - 1)
    return params.K / C ** params.h
