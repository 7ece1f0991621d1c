"""Exact-distance hop operators and per-hop frequency features.

Hop operators derive from powers of the normalized adjacency:

* hard mode zeroes every entry whose pair already appeared at a lower hop
  (the mask accumulates hops 1..k-1, so hop 1 is the normalized adjacency
  itself, self-loops included, and hops >= 2 carry exactly the pairs at
  shortest-path distance k).
* adaptive mode keeps ReLU(A^k - A^(k-1)) for k >= 2: new pairs plus pairs
  whose walk mass strictly grew.

Per-hop features come in a low-pass and a high-pass branch; the high-pass
branch uses the identity (I - A)x = x - Ax under raw weighting, or the
attention-reweighted complement operator under local attention.
Hop 0 is the identity channel carrying the raw features.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import HopBudgetError, ParseError, ValidationError
from .graph import Graph
from .sparse import SparseMatrix, matmul_dense, relu_sub, row_normalize, spgemm

DEFAULT_NNZ_BUDGET = 20_000_000


def _entry_keys(a: SparseMatrix) -> np.ndarray:
    """Flattened (row * n_cols + col) keys of the support, sorted ascending."""
    rows = np.repeat(np.arange(a.shape[0], dtype=np.int64), np.diff(a.indptr))
    return rows * a.shape[1] + a.indices


def _mask_out(a: SparseMatrix, mask_keys: np.ndarray) -> SparseMatrix:
    """Zero entries of ``a`` whose position appears in ``mask_keys``."""
    keys = _entry_keys(a)
    pos = np.searchsorted(mask_keys, keys)
    pos = np.minimum(pos, max(mask_keys.size - 1, 0))
    hit = mask_keys.size > 0
    drop = (mask_keys[pos] == keys) if hit else np.zeros(keys.size, dtype=bool)
    keep = ~drop
    kept_before = np.concatenate(([0], np.cumsum(keep.astype(np.int64))))
    indptr = kept_before[a.indptr]
    return SparseMatrix.from_arrays(
        a.shape, indptr, a.indices[keep], a.values[keep], validate=False
    )


def _check_budget(hop: int, nnz: int, budget: int):
    if nnz > budget:
        raise HopBudgetError(hop, nnz, budget)


def hard_mask_channels(
    a_hat: SparseMatrix, k_max: int, nnz_budget: int = DEFAULT_NNZ_BUDGET
) -> list[SparseMatrix]:
    """Operators [I, A, hop-2, ..., hop-K] with strictly new pairs per hop."""
    if k_max < 1:
        raise ValidationError("k_max must be at least 1")
    n = a_hat.shape[0]
    ops = [SparseMatrix.identity(n), a_hat]
    cum_keys = _entry_keys(a_hat)
    power = a_hat
    for k in range(2, k_max + 1):
        power = spgemm(power, a_hat)
        _check_budget(k, power.nnz, nnz_budget)
        masked = _mask_out(power, cum_keys)
        cum_keys = np.union1d(cum_keys, _entry_keys(masked))
        ops.append(masked)
    return ops


def adaptive_mask_channels(
    a_hat: SparseMatrix, k_max: int, nnz_budget: int = DEFAULT_NNZ_BUDGET
) -> list[SparseMatrix]:
    """Operators [I, A, ReLU(A^2 - A), ..., ReLU(A^K - A^(K-1))]."""
    if k_max < 1:
        raise ValidationError("k_max must be at least 1")
    n = a_hat.shape[0]
    ops = [SparseMatrix.identity(n), a_hat]
    prev_power = a_hat
    for k in range(2, k_max + 1):
        power = spgemm(prev_power, a_hat)
        _check_budget(k, power.nnz, nnz_budget)
        ops.append(relu_sub(power, prev_power))
        prev_power = power
    return ops


def build_operators(
    a_hat: SparseMatrix,
    k_max: int,
    mode: str = "adaptive",
    nnz_budget: int = DEFAULT_NNZ_BUDGET,
) -> list[SparseMatrix]:
    if mode == "hard":
        return hard_mask_channels(a_hat, k_max, nnz_budget)
    if mode == "adaptive":
        return adaptive_mask_channels(a_hat, k_max, nnz_budget)
    raise ValidationError(f"unknown mask mode {mode!r}")


# ---------------------------------------------------------------------------
# attention reweighting and features


def support_attention(op: SparseMatrix, h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """sigma((w h_i) . (w h_j)) evaluated on the operator support only."""
    if h.shape[1] != w.shape[0] or w.shape[0] != w.shape[1]:
        raise ValidationError("attention shapes: h (n x hdim), w (hdim x hdim)")
    if h.shape[0] != op.shape[0]:
        raise ValidationError("embedding row count must match operator")
    g = h @ w.T  # row i holds (w h_i)^T
    z = kernels.sddmm(op.shape, op.indptr, op.indices, g, g)
    return 1.0 / (1.0 + np.exp(-z))


def local_attention_ops(
    operators: list[SparseMatrix], h: np.ndarray, w: np.ndarray
) -> tuple[list[SparseMatrix], list[SparseMatrix]]:
    """Attention-reweighted low- and high-pass operators, row-renormalized.

    Applies RN(op * alpha) and RN(op * (1 - alpha)) uniformly; for the
    hop-0 identity both branches reduce to the identity again.
    """
    lp_ops, hp_ops = [], []
    for op in operators:
        alpha = support_attention(op, h, w)
        lp_ops.append(row_normalize(op.with_values(op.values * alpha)))
        hp_ops.append(row_normalize(op.with_values(op.values * (1.0 - alpha))))
    return lp_ops, hp_ops


def raw_highpass_features(operators: list[SparseMatrix], x: np.ndarray) -> list[np.ndarray]:
    """x - op @ x per hop, the in-place Laplacian response."""
    if x.shape[0] != operators[0].shape[0]:
        raise ValidationError("feature row count must match operators")
    return [x - matmul_dense(op, x) for op in operators]


@dataclass(frozen=True)
class HopChannelSet:
    """Immutable bundle of hop operators and materialized per-hop features.

    ``lp_features[k]``/``hp_features[k]`` hold the hop-k low/high-pass
    feature matrices; hop 0 carries the raw features with a zero high-pass
    branch (the identity annihilates its own Laplacian response).
    """

    k_max: int
    operators: list[SparseMatrix]
    mode: str
    weighting: str
    lp_features: list[np.ndarray]
    hp_features: list[np.ndarray]


def build_channel_set(
    a_hat: SparseMatrix,
    x: np.ndarray,
    k_max: int,
    mode: str = "adaptive",
    weighting: str = "raw",
    h_embed: np.ndarray | None = None,
    w_renorm: np.ndarray | None = None,
    nnz_budget: int = DEFAULT_NNZ_BUDGET,
) -> HopChannelSet:
    operators = build_operators(a_hat, k_max, mode, nnz_budget)
    if weighting == "raw":
        lp = [x] + [matmul_dense(op, x) for op in operators[1:]]
        hp = [np.zeros_like(x)] + raw_highpass_features(operators[1:], x)
    elif weighting == "local_attention":
        if h_embed is None or w_renorm is None:
            raise ValidationError("local_attention requires h_embed and w_renorm")
        lp_ops, hp_ops = local_attention_ops(operators[1:], h_embed, w_renorm)
        lp = [x] + [matmul_dense(op, x) for op in lp_ops]
        hp = [np.zeros_like(x)] + [matmul_dense(op, x) for op in hp_ops]
    else:
        raise ValidationError(f"unknown weighting {weighting!r} for exact channels")
    return HopChannelSet(
        k_max=k_max,
        operators=operators,
        mode=mode,
        weighting=weighting,
        lp_features=lp,
        hp_features=hp,
    )


# ---------------------------------------------------------------------------
# triangle-support audit


@dataclass(frozen=True)
class TriangleAudit:
    """Triangle-support audit of adaptively retained edges.

    For each original edge (u, v) with (A^2 - A)_{uv} > 0 the common-neighbor
    count must be at least floor(3 T(u, v)) + 1 with
    T = 1 - 1/(deg_u + 1) - 1/(deg_v + 1). ``violations`` lists edges that
    fail; retained/excluded support arrays feed the distribution comparison.
    """

    n_edges: int
    violations: list[tuple[int, int, int, int]]
    retained_supports: np.ndarray
    excluded_supports: np.ndarray

    @property
    def n_retained(self) -> int:
        return int(self.retained_supports.size)

    @property
    def mean_retained(self) -> float:
        return float(self.retained_supports.mean()) if self.retained_supports.size else float("nan")

    @property
    def mean_excluded(self) -> float:
        return float(self.excluded_supports.mean()) if self.excluded_supports.size else float("nan")

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "n_edges": self.n_edges,
            "n_retained": self.n_retained,
            "n_violations": len(self.violations),
            "violations": [list(v) for v in self.violations[:20]],
            "mean_retained_support": self.mean_retained,
            "mean_excluded_support": self.mean_excluded,
        }


def triangle_support_audit(graph: Graph, a_hat: SparseMatrix) -> TriangleAudit:
    pairs = graph.edge_pairs()
    square = spgemm(a_hat, a_hat)
    neighbor_sets = [set(map(int, graph.neighbors(u))) for u in range(graph.n)]
    deg_hat = graph.degrees().astype(np.float64) + 1.0
    violations = []
    retained, excluded = [], []
    for u, v in pairs:
        u, v = int(u), int(v)
        cols, vals = square.row(u)
        p = np.searchsorted(cols, v)
        sq_uv = float(vals[p]) if p < cols.size and cols[p] == v else 0.0
        acols, avals = a_hat.row(u)
        q = np.searchsorted(acols, v)
        a_uv = float(avals[q]) if q < acols.size and acols[q] == v else 0.0
        supp = len(neighbor_sets[u] & neighbor_sets[v])
        if sq_uv - a_uv > 0.0:
            t_uv = 1.0 - 1.0 / deg_hat[u] - 1.0 / deg_hat[v]
            bound = int(np.floor(3.0 * t_uv)) + 1
            retained.append(supp)
            if supp < bound:
                violations.append((u, v, supp, bound))
        else:
            excluded.append(supp)
    return TriangleAudit(
        n_edges=pairs.shape[0],
        violations=violations,
        retained_supports=np.array(retained, dtype=np.int64),
        excluded_supports=np.array(excluded, dtype=np.int64),
    )


# ---------------------------------------------------------------------------
# operator cache

CACHE_MAGIC = b"AHOP"
CACHE_VERSION = 1


def matrix_hash(a: SparseMatrix) -> str:
    digest = hashlib.sha256()
    digest.update(struct.pack("<qq", *a.shape))
    digest.update(np.ascontiguousarray(a.indptr).astype("<i8").tobytes())
    digest.update(np.ascontiguousarray(a.indices).astype("<i8").tobytes())
    digest.update(np.ascontiguousarray(a.values).astype("<f8").tobytes())
    return digest.hexdigest()


def hop_cache_key(a_hat: SparseMatrix, k_max: int, mode: str) -> str:
    return hashlib.sha256(
        f"{matrix_hash(a_hat)}:{k_max}:{mode}".encode()
    ).hexdigest()[:24]


def write_hop_cache(path: str, operators: list[SparseMatrix], mode: str):
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", CACHE_VERSION))
        mode_b = mode.encode()
        fh.write(struct.pack("<I", len(mode_b)))
        fh.write(mode_b)
        fh.write(struct.pack("<I", len(operators)))
        for op in operators:
            fh.write(struct.pack("<qqq", op.shape[0], op.shape[1], op.nnz))
            fh.write(op.indptr.astype("<i8").tobytes())
            fh.write(op.indices.astype("<i8").tobytes())
            fh.write(op.values.astype("<f8").tobytes())


def read_hop_cache(path: str) -> tuple[list[SparseMatrix], str]:
    with open(path, "rb") as fh:
        if fh.read(4) != CACHE_MAGIC:
            raise ParseError("bad magic bytes", path)
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CACHE_VERSION:
            raise ParseError(f"unsupported cache version {version}", path)
        (mode_len,) = struct.unpack("<I", fh.read(4))
        mode = fh.read(mode_len).decode()
        (count,) = struct.unpack("<I", fh.read(4))
        ops = []
        for _ in range(count):
            rows, cols, nnz = struct.unpack("<qqq", fh.read(24))
            indptr = np.frombuffer(fh.read(8 * (rows + 1)), dtype="<i8").astype(np.int64)
            indices = np.frombuffer(fh.read(8 * nnz), dtype="<i8").astype(np.int64)
            values = np.frombuffer(fh.read(8 * nnz), dtype="<f8").astype(np.float64)
            ops.append(SparseMatrix.from_arrays((rows, cols), indptr, indices, values))
        return ops, mode
