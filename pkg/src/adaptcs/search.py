"""Online community search over a trained embedding table.

Two algorithms:

* scs: breadth-first expansion over the positive graph (original edges whose
  endpoint embeddings agree strongly), teleporting to the most similar
  unvisited node whenever the frontier empties.
* acs: score a cosine candidate pool with a homophily-adaptive mix of
  embedding similarity and adjacency, so direct neighbors are rewarded on
  homophilic graphs and penalized on heterophilic ones.

Both include the query and return up to ``k_size`` additional members.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .graph import TRAIN, Graph


@dataclass(frozen=True)
class CommunityResult:
    """One community-search answer.

    ``members`` starts with the query node; ``scores`` aligns with members.
    ``teleports`` counts frontier restarts (scs only, zero elsewhere).
    """

    query: int
    members: np.ndarray
    scores: np.ndarray
    algorithm: str
    elapsed_s: float
    teleports: int = 0

    def check(self, k_size: int | None = None, n: int | None = None):
        if self.members.size == 0 or self.members[0] != self.query:
            raise ValidationError("community must start with the query node")
        if np.unique(self.members).size != self.members.size:
            raise ValidationError("community members must be unique")
        if self.scores.shape != self.members.shape:
            raise ValidationError("scores must align with members")
        if k_size is not None and self.members.size > k_size + 1:
            raise ValidationError("community exceeds requested size")
        if n is not None and (self.members.min() < 0 or self.members.max() >= n):
            raise ValidationError("member id out of range")
        if self.elapsed_s < 0:
            raise ValidationError("elapsed time cannot be negative")


@dataclass(frozen=True)
class SearchConfig:
    """Knobs shared by the search routines.

    k_size is the number of members beyond the query. alpha_top scales the
    ACS candidate pool; the pool is clamped to the graph size.
    """

    k_size: int = 30
    tau_sign: float = 0.9
    tau_quantile: float | None = None
    tau_weight: float = 0.9
    lambda_bonus: float = 1.0
    lambda_penalty: float = 1.0
    alpha_top: float = 2.0

    def check(self):
        if not 0.0 <= self.tau_weight <= 1.0:
            raise ValidationError("tau_weight must lie in [0, 1]")
        if self.alpha_top < 1.0:
            raise ValidationError("alpha_top must be at least 1")
        if self.lambda_bonus < 0 or self.lambda_penalty < 0:
            raise ValidationError("lambda weights must be nonnegative")
        if self.k_size < 0:
            raise ValidationError("k_size must be nonnegative")


def unit_rows(emb: np.ndarray) -> np.ndarray:
    """Row-normalize to unit length; all-zero rows stay zero."""
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return np.where(norms > 0, emb / np.where(norms > 0, norms, 1.0), 0.0)


def build_positive_graph(
    graph: Graph,
    unit_emb: np.ndarray,
    tau_sign: float = 0.9,
    tau_quantile: float | None = None,
) -> Graph:
    """Keep original edges whose endpoint cosine is at least the threshold.

    Only existing edges survive; no new pairs are introduced. With
    ``tau_quantile`` set, the threshold is that quantile of the observed
    edge cosines instead of the fixed ``tau_sign``.
    """
    if unit_emb.shape[0] != graph.n:
        raise ValidationError("embedding row count must equal node count")
    pairs = graph.edge_pairs()
    if pairs.shape[0] == 0:
        return graph
    cos = np.einsum("eh,eh->e", unit_emb[pairs[:, 0]], unit_emb[pairs[:, 1]])
    tau = tau_sign if tau_quantile is None else float(np.quantile(cos, tau_quantile))
    kept = pairs[cos >= tau]
    return Graph.from_pairs(graph.n, kept[:, 0], kept[:, 1])


def scs(positive: Graph, unit_emb: np.ndarray, query: int, config: SearchConfig) -> CommunityResult:
    """Similarity-guided BFS with teleportation over the positive graph.

    Walks breadth-first from the query, enqueueing neighbors in ascending id
    order. When the frontier empties before ``k_size`` extra members are
    collected, teleports to the unvisited node most similar to the query
    (ties to the lower id) and keeps walking.
    """
    n = positive.n
    if not 0 <= query < n:
        raise ValidationError(f"query {query} outside [0, {n})")
    t0 = time.perf_counter()
    sim = unit_emb @ unit_emb[query]
    need = config.k_size + 1
    visited = np.zeros(n, dtype=bool)
    queue = np.empty(n, dtype=np.int64)
    visited[query] = True
    queue[0] = query
    head, tail = 0, 1
    members: list[np.ndarray] = []
    collected = 0
    teleports = 0
    indptr, indices = positive.adj.indptr, positive.adj.indices
    while collected < need:
        batch, head, tail = kernels.bfs_batch(
            indptr, indices, visited, queue, head, tail, need - collected
        )
        if batch.size:
            members.append(batch)
            collected += batch.size
        if collected >= need:
            break
        if head >= tail:
            if visited.all():
                break
            masked = np.where(visited, -np.inf, sim)
            target = int(np.argmax(masked))
            visited[target] = True
            queue[tail] = target
            tail += 1
            teleports += 1
    out = np.concatenate(members) if members else np.array([query], dtype=np.int64)
    elapsed = time.perf_counter() - t0
    return CommunityResult(
        query=query,
        members=out,
        scores=sim[out],
        algorithm="adaptcs-scs",
        elapsed_s=elapsed,
        teleports=teleports,
    )


def acs(
    graph: Graph,
    unit_emb: np.ndarray,
    query: int,
    config: SearchConfig,
    h_est: float,
) -> CommunityResult:
    """Homophily-adaptive scoring over a cosine candidate pool.

    Candidates are the top ``ceil(alpha_top * k_size)`` nodes by cosine to
    the query (query excluded, pool clamped to n - 1). Each candidate u
    scores ``tau_weight * S_qu + (1 - tau_weight) * A_qu * w`` where S is
    cosine similarity, A is one-hop adjacency, and w rewards neighbors when
    the homophily estimate is at least one half (boundary included) and
    penalizes them otherwise. Ties break to higher similarity then lower id.
    """
    n = graph.n
    if not 0 <= query < n:
        raise ValidationError(f"query {query} outside [0, {n})")
    config.check()
    t0 = time.perf_counter()
    self_sim = float(unit_emb[query] @ unit_emb[query])
    sim = unit_emb @ unit_emb[query]
    sim[query] = -np.inf
    pool_size = min(int(np.ceil(config.alpha_top * config.k_size)), n - 1)
    if h_est >= 0.5:
        w = h_est * config.lambda_bonus
    else:
        w = -(1.0 - h_est) * config.lambda_penalty
    if pool_size <= 0:
        members = np.array([query], dtype=np.int64)
        scores = np.array([config.tau_weight * self_sim])
        return CommunityResult(query, members, scores, "adaptcs-acs",
                               time.perf_counter() - t0)
    pool = np.argpartition(sim, -pool_size)[-pool_size:]
    adj_q = np.zeros(n, dtype=np.float64)
    adj_q[graph.neighbors(query)] = 1.0
    score = config.tau_weight * sim[pool] + (1.0 - config.tau_weight) * adj_q[pool] * w
    order = np.lexsort((pool, -sim[pool], -score))
    chosen = pool[order][: config.k_size]
    members = np.concatenate([[query], chosen]).astype(np.int64)
    scores = np.concatenate([[config.tau_weight * self_sim], score[order][: config.k_size]])
    elapsed = time.perf_counter() - t0
    return CommunityResult(
        query=query, members=members, scores=scores, algorithm="adaptcs-acs", elapsed_s=elapsed
    )


def estimate_homophily(graph: Graph, labels: np.ndarray, split: np.ndarray) -> float:
    """Same-label fraction over edges with both endpoints in the train split.

    Falls back to the neutral value 0.5 (with a warning) when no such edge
    exists, so downstream weighting stays defined.
    """
    pairs = graph.edge_pairs()
    if pairs.shape[0]:
        both_train = (split[pairs[:, 0]] == TRAIN) & (split[pairs[:, 1]] == TRAIN)
        pairs = pairs[both_train]
    if pairs.shape[0] == 0:
        warnings.warn("no train-train edges; homophily estimate defaults to 0.5")
        return 0.5
    return float((labels[pairs[:, 0]] == labels[pairs[:, 1]]).mean())


def top_cosine(unit_emb: np.ndarray, query: int, k_size: int) -> np.ndarray:
    """Plain top-k cosine ranking (ties to lower id), used as a degenerate oracle."""
    sim = unit_emb @ unit_emb[query]
    sim[query] = -np.inf
    order = np.lexsort((np.arange(sim.size), -sim))
    return order[:k_size]


__all__ = [
    "CommunityResult",
    "SearchConfig",
    "acs",
    "build_positive_graph",
    "estimate_homophily",
    "scs",
    "top_cosine",
    "unit_rows",
]
