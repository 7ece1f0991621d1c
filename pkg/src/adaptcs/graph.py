"""Graph and dataset containers, text loaders, splits, and homophily.

External formats:

* graph: one edge per line, two 0-based integer ids separated by whitespace
  (canonically a tab); ``#`` starts a comment line; edges are symmetrized
  and deduplicated on load; self-loop lines are dropped.
* features: CSV, row i holds the float feature vector of node i.
* labels: CSV ``node_id,label`` with nonnegative integer labels, every node
  appearing exactly once; an optional literal ``node_id,label`` header is
  tolerated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ParseError, UndefinedMetricError, ValidationError
from .sparse import SparseMatrix

TRAIN, VAL, TEST = 0, 1, 2


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph stored as a symmetric binary CSR adjacency."""

    n: int
    adj: SparseMatrix

    @staticmethod
    def from_pairs(n: int, u, v) -> "Graph":
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        keep = u != v
        u, v = u[keep], v[keep]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        adj = SparseMatrix.from_coo((n, n), rows, cols, np.ones(rows.size))
        # duplicate input pairs sum above one; the graph is unweighted
        adj = adj.with_values(np.ones(adj.nnz))
        g = Graph(n=n, adj=adj)
        g.check()
        return g

    def check(self):
        if self.adj.shape != (self.n, self.n):
            raise ValidationError("adjacency shape must be (n, n)")
        if np.any(self.adj.diagonal() != 0.0):
            raise ValidationError("graph must have no self-loops")
        if self.adj.nnz and not np.all(self.adj.values == 1.0):
            raise ValidationError("adjacency must be binary")
        t = self.adj.transpose()
        if not (
            np.array_equal(self.adj.indptr, t.indptr)
            and np.array_equal(self.adj.indices, t.indices)
        ):
            raise ValidationError("adjacency must be symmetric")

    @property
    def m(self) -> int:
        """Number of undirected edges."""
        return self.adj.nnz // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.adj.indptr).astype(np.int64)

    def neighbors(self, u: int) -> np.ndarray:
        return self.adj.indices[self.adj.indptr[u] : self.adj.indptr[u + 1]]

    def edge_pairs(self) -> np.ndarray:
        """(m, 2) array of undirected edges with u < v, lexicographically sorted."""
        rows = np.repeat(np.arange(self.n), np.diff(self.adj.indptr))
        cols = self.adj.indices
        keep = rows < cols
        return np.column_stack([rows[keep], cols[keep]])

    def bfs_distances(self, src: int) -> np.ndarray:
        return kernels.bfs_distances(self.n, self.adj.indptr, self.adj.indices, src)


@dataclass(frozen=True)
class DataSet:
    """Graph plus node features, integer labels, and a train/val/test split."""

    name: str
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    split: np.ndarray = field(default=None)

    @property
    def n(self) -> int:
        return self.graph.n

    def with_split(self, split: np.ndarray) -> "DataSet":
        return DataSet(self.name, self.graph, self.features, self.labels, self.n_classes, split)

    def nodes_in(self, part: int) -> np.ndarray:
        if self.split is None:
            raise ValidationError("dataset has no split assigned")
        return np.flatnonzero(self.split == part)

    def check(self):
        n = self.graph.n
        if self.features.shape[0] != n:
            raise ValidationError("feature row count must equal node count")
        if not np.all(np.isfinite(self.features)):
            raise ValidationError("features must be finite")
        if self.labels.shape != (n,):
            raise ValidationError("labels length must equal node count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValidationError("labels must lie in [0, n_classes)")
        if self.split is not None and self.split.shape != (n,):
            raise ValidationError("split length must equal node count")


# ---------------------------------------------------------------------------
# loaders


def load_graph(path: str, n_nodes: int | None = None) -> Graph:
    us, vs = [], []
    max_id = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(
                    f"expected two node ids, got {len(parts)} fields", path, lineno
                )
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer node id in {line!r}", path, lineno) from None
            if u < 0 or v < 0:
                raise ParseError("node ids must be nonnegative", path, lineno)
            if n_nodes is not None and (u >= n_nodes or v >= n_nodes):
                raise ParseError(
                    f"node id exceeds declared node count {n_nodes}", path, lineno
                )
            max_id = max(max_id, u, v)
            us.append(u)
            vs.append(v)
    n = n_nodes if n_nodes is not None else max_id + 1
    return Graph.from_pairs(n, np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64))


def load_features(path: str) -> np.ndarray:
    try:
        feats = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2, comments="#")
    except ValueError as exc:
        line = _locate_bad_csv_line(path)
        raise ParseError(f"malformed feature row ({exc})", path, line) from None
    if not np.all(np.isfinite(feats)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(feats), axis=1))[0]) + 1
        raise ParseError("non-finite feature value", path, bad)
    return feats


def _locate_bad_csv_line(path: str) -> int | None:
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                [float(p) for p in parts]
            except ValueError:
                return lineno
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                return lineno
    return None


def load_labels(path: str, n_nodes: int) -> tuple[np.ndarray, int]:
    labels = np.full(n_nodes, -1, dtype=np.int64)
    seen = np.zeros(n_nodes, dtype=bool)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError("expected node_id,label", path, lineno)
            try:
                node, lab = int(parts[0]), int(parts[1])
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ParseError(f"non-integer field in {line!r}", path, lineno) from None
            if node < 0 or node >= n_nodes:
                raise ParseError(f"node id {node} outside [0, {n_nodes})", path, lineno)
            if lab < 0:
                raise ParseError("labels must be nonnegative", path, lineno)
            if seen[node]:
                raise ParseError(f"node {node} labeled twice", path, lineno)
            seen[node] = True
            labels[node] = lab
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ParseError(f"node {missing} has no label", path)
    return labels, int(labels.max()) + 1


def load_dataset(
    graph_path: str,
    features_path: str,
    labels_path: str,
    seed: int,
    name: str = "dataset",
) -> DataSet:
    """Load and validate a dataset, assigning a seeded stratified split."""
    features = load_features(features_path)
    n = features.shape[0]
    graph = load_graph(graph_path, n_nodes=n)
    labels, n_classes = load_labels(labels_path, n)
    ds = DataSet(name=name, graph=graph, features=features, labels=labels, n_classes=n_classes)
    ds = ds.with_split(stratified_split(labels, seed))
    ds.check()
    return ds


# ---------------------------------------------------------------------------
# splits and homophily


def stratified_split(labels: np.ndarray, seed: int, fractions=(0.6, 0.2, 0.2)) -> np.ndarray:
    """Per-class train/val/test assignment, deterministic in (labels, seed).

    Every class with at least one node contributes at least one training
    node; per-class counts round to the nearest integer, so they track the
    requested fractions within one node.
    """
    if abs(sum(fractions) - 1.0) > 1e-12:
        raise ValidationError("split fractions must sum to 1")
    rng = np.random.default_rng(seed)
    split = np.empty(labels.shape[0], dtype=np.int8)
    for cls in range(int(labels.max()) + 1 if labels.size else 0):
        ids = np.flatnonzero(labels == cls)
        if ids.size == 0:
            continue
        ids = ids[rng.permutation(ids.size)]
        s = ids.size
        n_tr = max(1, int(round(fractions[0] * s)))
        n_val = int(round(fractions[1] * s))
        n_val = min(n_val, s - n_tr)
        split[ids[:n_tr]] = TRAIN
        split[ids[n_tr : n_tr + n_val]] = VAL
        split[ids[n_tr + n_val :]] = TEST
    return split


def edge_homophily(graph: Graph, labels: np.ndarray) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    pairs = graph.edge_pairs()
    if pairs.shape[0] == 0:
        raise UndefinedMetricError("homophily is undefined on an edgeless graph")
    same = labels[pairs[:, 0]] == labels[pairs[:, 1]]
    return float(same.mean())
