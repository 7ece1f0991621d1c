"""Seeded synthetic graph and dataset generators used by tests, the
theory demos, and the scaling benchmarks.

Everything here is a pure function of its arguments (including the seed),
so repeated calls produce identical objects.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .graph import DataSet, Graph, stratified_split


def er_graph(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi G(n, p) over unordered pairs."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph.from_pairs(n, iu[keep], ju[keep])


def sbm_graph(sizes: list[int], p_in: float, p_out: float, seed: int) -> tuple[Graph, np.ndarray]:
    """Stochastic block model; returns the graph and block labels."""
    n = int(sum(sizes))
    labels = np.concatenate([np.full(s, b, dtype=np.int64) for b, s in enumerate(sizes)])
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, p_in, p_out)
    keep = rng.random(iu.size) < prob
    return Graph.from_pairs(n, iu[keep], ju[keep]), labels


def sbm_dataset(
    sizes: list[int],
    p_in: float,
    p_out: float,
    seed: int,
    feature_dim: int = 16,
    noise: float = 0.3,
    name: str = "sbm",
) -> DataSet:
    """SBM graph with Gaussian class-mean features and a stratified split."""
    graph, labels = sbm_graph(sizes, p_in, p_out, seed)
    rng = np.random.default_rng(seed + 1)
    means = rng.normal(size=(len(sizes), feature_dim))
    features = means[labels] + noise * rng.normal(size=(graph.n, feature_dim))
    split = stratified_split(labels, seed=seed)
    return DataSet(
        name=name,
        graph=graph,
        features=features,
        labels=labels,
        n_classes=len(sizes),
        split=split,
    )


def cycle_graph(n: int) -> Graph:
    """Simple cycle 0-1-...-(n-1)-0."""
    if n < 3:
        raise ValidationError("cycle needs at least 3 nodes")
    ids = np.arange(n)
    return Graph.from_pairs(n, ids, (ids + 1) % n)


def labeled_cycle(n: int, n_classes: int, name: str = "cycle") -> DataSet:
    """Cycle whose labels repeat 0..c-1 around the ring, one-hot features.

    Every edge joins consecutive classes, so the graph is perfectly
    heterophilic; same-class nodes sit exactly n_classes hops apart.
    """
    if n % n_classes != 0:
        raise ValidationError("cycle length must be a multiple of the class count")
    graph = cycle_graph(n)
    labels = np.arange(n, dtype=np.int64) % n_classes
    features = np.eye(n_classes, dtype=np.float64)[labels]
    split = stratified_split(labels, seed=0)
    return DataSet(
        name=name,
        graph=graph,
        features=features,
        labels=labels,
        n_classes=n_classes,
        split=split,
    )


def flip_toy_binary(n: int = 8) -> DataSet:
    """Alternating 2-class cycle: high-pass similarity separates the classes."""
    if n % 2 != 0:
        raise ValidationError("binary toy needs an even cycle")
    return labeled_cycle(n, 2, name="flip-binary")


def flip_toy_four(n: int = 16) -> DataSet:
    """4-class cycle: two-hop paths join classes 0-2 and 1-3, so plain
    high-pass aggregation assigns them spuriously positive similarity."""
    if n % 4 != 0:
        raise ValidationError("four-class toy needs a multiple-of-4 cycle")
    return labeled_cycle(n, 4, name="flip-four")


def planted_two_class(
    n: int = 20, p_in: float = 0.6, p_out: float = 0.1, seed: int = 0
) -> DataSet:
    """Small assortative 2-block dataset for positive-graph sanity checks."""
    return sbm_dataset([n // 2, n - n // 2], p_in, p_out, seed, feature_dim=8,
                       noise=0.2, name="planted2")


def ring_with_chords(n: int, m: int, seed: int) -> Graph:
    """Connected graph with ~m edges: a ring plus random chords.

    Used for the query-latency ladder; generation is O(m) and seeded.
    """
    if m < n:
        raise ValidationError("need at least n edges to keep the ring")
    ids = np.arange(n)
    ring = np.stack([ids, (ids + 1) % n], axis=1)  # kept as rows for concat
    extra = m - n
    rng = np.random.default_rng(seed)
    # oversample then dedupe against accidental duplicates and self loops
    cand = rng.integers(0, n, size=(int(extra * 1.3) + 16, 2))
    cand = cand[cand[:, 0] != cand[:, 1]]
    lo = np.minimum(cand[:, 0], cand[:, 1])
    hi = np.maximum(cand[:, 0], cand[:, 1])
    chords = np.unique(np.stack([lo, hi], axis=1), axis=0)
    rng.shuffle(chords)
    pairs = np.concatenate([ring, chords[:extra]], axis=0)
    return Graph.from_pairs(n, pairs[:, 0], pairs[:, 1])


def size_ladder(seed: int = 0, densify: int = 10) -> list[Graph]:
    """Three-rung ladder up to n=1e5, m=1e6 for scaling measurements."""
    rungs = [(1_000, 1_000 * densify), (10_000, 10_000 * densify),
             (100_000, 100_000 * densify)]
    return [ring_with_chords(n, m, seed + i) for i, (n, m) in enumerate(rungs)]


def random_unit_embeddings(n: int, dim: int, seed: int) -> np.ndarray:
    """Row-normalized Gaussian embeddings for search benchmarks."""
    rng = np.random.default_rng(seed)
    emb = rng.normal(size=(n, dim))
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return emb / np.where(norms > 0, norms, 1.0)
