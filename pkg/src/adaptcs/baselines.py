"""Classical community-search baselines: k-core, k-truss, label propagation.

Size convention: these baselines return min(k_size, reachable nodes) members
in total, query included, mirroring the fixed-size community statement for
classical methods. The adaptcs searchers in :mod:`adaptcs.search` instead
return k_size nodes beyond the query.

Tie-breaking everywhere: (score desc, BFS hop asc, node id asc).
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .errors import ValidationError
from .graph import TRAIN, DataSet, Graph
from .search import CommunityResult, unit_rows
from .sparse import matmul_dense, row_normalize


def _ranked_members(query, cand, level, hops, k_size):
    """Query first, then candidates by (level desc, hop asc, id asc)."""
    order = np.lexsort((cand, hops, -level))
    take = max(k_size - 1, 0)
    return np.concatenate([[query], cand[order][:take]]).astype(np.int64)


def core_numbers(graph: Graph) -> np.ndarray:
    return kernels.core_numbers(graph.n, graph.adj.indptr, graph.adj.indices)


def k_core_community(graph: Graph, query: int, k_size: int) -> CommunityResult:
    """Community from the densest core containing the query.

    Finds the query's core number k*, then collects BFS-nearest nodes,
    preferring higher cores and padding from lower cores when the k*-core
    is smaller than requested. Unreachable nodes are never returned.
    """
    if k_size < 1:
        raise ValidationError("k_size must be at least 1")
    if not 0 <= query < graph.n:
        raise ValidationError(f"query {query} outside [0, {graph.n})")
    t0 = time.perf_counter()
    core = core_numbers(graph)
    k_star = int(core[query])
    hops = graph.bfs_distances(query)
    cand = np.flatnonzero((hops > 0))  # reachable, excluding the query
    level = np.minimum(core[cand], k_star).astype(np.float64)
    members = _ranked_members(query, cand, level, hops[cand], k_size)
    score_by_node = np.minimum(core, k_star).astype(np.float64)
    elapsed = time.perf_counter() - t0
    return CommunityResult(
        query=query,
        members=members,
        scores=score_by_node[members],
        algorithm="k-core",
        elapsed_s=elapsed,
    )


def edge_trussness(graph: Graph) -> tuple[np.ndarray, np.ndarray]:
    """Trussness of every undirected edge (pairs array aligned with values).

    Edge e survives in the k-truss iff trussness[e] >= k; leaves and bridge
    edges get the floor value 2. Computed by support peeling with incremental
    triangle updates.
    """
    pairs = graph.edge_pairs()
    m = pairs.shape[0]
    truss = np.full(m, 2, dtype=np.int64)
    if m == 0:
        return pairs, truss
    eid = {(int(u), int(v)): e for e, (u, v) in enumerate(pairs)}
    adj = [set(map(int, graph.neighbors(u))) for u in range(graph.n)]
    support = np.array(
        [len(adj[int(u)] & adj[int(v)]) for u, v in pairs], dtype=np.int64
    )
    alive = np.ones(m, dtype=bool)
    remaining = m
    k = 3
    while remaining:
        queue = [int(e) for e in np.flatnonzero(alive & (support < k - 2))]
        if not queue:
            k += 1
            continue
        while queue:
            e = queue.pop()
            if not alive[e]:
                continue
            alive[e] = False
            remaining -= 1
            truss[e] = k - 1
            u, v = int(pairs[e, 0]), int(pairs[e, 1])
            common = adj[u] & adj[v]
            adj[u].discard(v)
            adj[v].discard(u)
            for w in common:
                for a, b in ((u, w), (v, w)):
                    key = (a, b) if a < b else (b, a)
                    f = eid[key]
                    if alive[f]:
                        support[f] -= 1
                        if support[f] < k - 2:
                            queue.append(f)
    return pairs, truss


def k_truss_community(graph: Graph, query: int, k_size: int) -> CommunityResult:
    """Community from the strongest truss containing the query.

    A node's truss level is the maximum trussness over its incident edges
    (floor 2, so triangle-free graphs degenerate to BFS-nearest retrieval).
    Expansion prefers higher truss levels, then BFS proximity, then id.
    """
    if k_size < 1:
        raise ValidationError("k_size must be at least 1")
    if not 0 <= query < graph.n:
        raise ValidationError(f"query {query} outside [0, {graph.n})")
    t0 = time.perf_counter()
    pairs, truss = edge_trussness(graph)
    level = np.full(graph.n, 2, dtype=np.int64)
    for e, (u, v) in enumerate(pairs):
        t = truss[e]
        if t > level[u]:
            level[u] = t
        if t > level[v]:
            level[v] = t
    k_star = int(level[query])
    hops = graph.bfs_distances(query)
    cand = np.flatnonzero(hops > 0)
    eff = np.minimum(level[cand], k_star).astype(np.float64)
    members = _ranked_members(query, cand, eff, hops[cand], k_size)
    score_by_node = np.minimum(level, k_star).astype(np.float64)
    elapsed = time.perf_counter() - t0
    return CommunityResult(
        query=query,
        members=members,
        scores=score_by_node[members],
        algorithm="k-truss",
        elapsed_s=elapsed,
    )


def propagate_labels(ds: DataSet, iterations: int = 50) -> np.ndarray:
    """Diffuse train one-hot labels with the row-normalized adjacency.

    Train rows are clamped back to their one-hot values after every
    multiplication, the classical semi-supervised propagation scheme.
    """
    n, c = ds.n, ds.n_classes
    prop = row_normalize(ds.graph.adj)
    train = ds.nodes_in(TRAIN)
    seed_mass = np.zeros((n, c), dtype=np.float64)
    seed_mass[train, ds.labels[train]] = 1.0
    state = seed_mass.copy()
    for _ in range(iterations):
        state = matmul_dense(prop, state)
        state[train] = seed_mass[train]
    return state


def label_propagation_community(
    ds: DataSet, query: int, k_size: int, iterations: int = 50
) -> CommunityResult:
    """Top scorers of the query's predicted class under label propagation.

    Candidates need positive propagated mass in the predicted class. A query
    with no mass at all (isolated from every train seed) falls back to
    feature-cosine retrieval so the result stays defined.
    """
    if k_size < 1:
        raise ValidationError("k_size must be at least 1")
    if not 0 <= query < ds.n:
        raise ValidationError(f"query {query} outside [0, {ds.n})")
    t0 = time.perf_counter()
    state = propagate_labels(ds, iterations)
    hops = ds.graph.bfs_distances(query)
    hop_key = np.where(hops < 0, ds.n + 1, hops)
    if state[query].sum() <= 0.0:
        feats = unit_rows(ds.features)
        sim = feats @ feats[query]
        sim[query] = -np.inf
        cand = np.arange(ds.n)
        cand = cand[cand != query]
        members = _ranked_members(query, cand, sim[cand], hop_key[cand], k_size)
        scores = np.concatenate([[1.0], sim[members[1:]]])
    else:
        predicted = int(np.argmax(state[query]))
        mass = state[:, predicted]
        cand = np.flatnonzero(mass > 0.0)
        cand = cand[cand != query]
        members = _ranked_members(query, cand, mass[cand], hop_key[cand], k_size)
        scores = mass[members]
    elapsed = time.perf_counter() - t0
    return CommunityResult(
        query=query,
        members=members,
        scores=scores,
        algorithm="lp",
        elapsed_s=elapsed,
    )
