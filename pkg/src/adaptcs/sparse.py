"""CSR matrix type, the handful of sparse ops the encoder needs, and a
seeded randomized truncated SVD.

Values with magnitude at or below ``ZERO_TOL`` are treated as structural
zeros and dropped whenever a new matrix is produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import SvdConvergenceError, ValidationError

ZERO_TOL = 1e-15


def _compact_arrays(indptr, indices, values, tol=ZERO_TOL):
    """Drop entries with |value| <= tol, recomputing indptr exactly."""
    keep = np.abs(values) > tol
    if keep.all():
        return indptr, indices, values
    kept_before = np.concatenate(([0], np.cumsum(keep.astype(np.int64))))
    new_indptr = kept_before[indptr]
    return new_indptr, indices[keep], values[keep]


@dataclass(frozen=True)
class SparseMatrix:
    """Immutable CSR matrix with sorted, duplicate-free column indices."""

    shape: tuple[int, int]
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    @staticmethod
    def from_arrays(shape, indptr, indices, values, validate=True, compact=True):
        indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        indices = np.ascontiguousarray(indices, dtype=np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if compact:
            indptr, indices, values = _compact_arrays(indptr, indices, values)
        m = SparseMatrix(
            (int(shape[0]), int(shape[1])), indptr, indices, values
        )
        if validate:
            m.check()
        return m

    @staticmethod
    def from_coo(shape, rows, cols, vals, validate=True):
        """Build from triplets; duplicate coordinates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        n_rows, n_cols = int(shape[0]), int(shape[1])
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValidationError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= n_cols):
            raise ValidationError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            key = rows * n_cols + cols
            first = np.concatenate(([True], key[1:] != key[:-1]))
            group = np.cumsum(first) - 1
            summed = np.zeros(int(first.sum()), dtype=np.float64)
            np.add.at(summed, group, vals)
            rows, cols, vals = rows[first], cols[first], summed
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        return SparseMatrix.from_arrays((n_rows, n_cols), indptr, cols, vals, validate=validate)

    @staticmethod
    def from_dense(a, tol=ZERO_TOL):
        a = np.asarray(a, dtype=np.float64)
        rows, cols = np.nonzero(np.abs(a) > tol)
        return SparseMatrix.from_coo(a.shape, rows, cols, a[rows, cols])

    @staticmethod
    def identity(n):
        idx = np.arange(n, dtype=np.int64)
        return SparseMatrix(
            (n, n), np.arange(n + 1, dtype=np.int64), idx, np.ones(n, dtype=np.float64)
        )

    # -- basic queries ------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def check(self):
        """Raise ValidationError if any CSR structural invariant fails."""
        n_rows, n_cols = self.shape
        if self.indptr.shape != (n_rows + 1,):
            raise ValidationError("indptr length must be rows + 1")
        if self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise ValidationError("indptr must start at 0 and be nondecreasing")
        nnz = self.nnz
        if self.indices.shape[0] != nnz or self.values.shape[0] != nnz:
            raise ValidationError("indices/values length must equal indptr[-1]")
        if nnz:
            if self.indices.min() < 0 or self.indices.max() >= n_cols:
                raise ValidationError("column index out of range")
            for i in range(n_rows):
                row = self.indices[self.indptr[i] : self.indptr[i + 1]]
                if row.size > 1 and np.any(np.diff(row) <= 0):
                    raise ValidationError(f"row {i} indices not strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("values must be finite")

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))
        out[rows, self.indices] = self.values
        return out

    def row(self, i) -> tuple[np.ndarray, np.ndarray]:
        sl = slice(self.indptr[i], self.indptr[i + 1])
        return self.indices[sl], self.values[sl]

    def diagonal(self) -> np.ndarray:
        n = min(self.shape)
        d = np.zeros(n, dtype=np.float64)
        for i in range(n):
            cols, vals = self.row(i)
            p = np.searchsorted(cols, i)
            if p < cols.size and cols[p] == i:
                d[i] = vals[p]
        return d

    def transpose(self) -> "SparseMatrix":
        tp, ti, tv = kernels.csr_transpose(self.shape, self.indptr, self.indices, self.values)
        return SparseMatrix((self.shape[1], self.shape[0]), tp, ti, tv)

    def scale_rows(self, s) -> "SparseMatrix":
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.shape[0],):
            raise ValidationError("row scale length must equal row count")
        vals = self.values * np.repeat(s, np.diff(self.indptr))
        return SparseMatrix.from_arrays(self.shape, self.indptr, self.indices, vals, validate=False)

    def with_values(self, values) -> "SparseMatrix":
        """Same support, new values (no compaction: support must be preserved)."""
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != self.values.shape:
            raise ValidationError("replacement values must match nnz")
        return SparseMatrix(self.shape, self.indptr, self.indices, values)

    def row_sums(self) -> np.ndarray:
        return kernels.row_sums(self.shape[0], self.indptr, self.values)


# ---------------------------------------------------------------------------
# operations


def spgemm(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Sparse product a @ b with explicit zeros dropped."""
    if a.shape[1] != b.shape[0]:
        raise ValidationError(f"spgemm shape mismatch {a.shape} @ {b.shape}")
    indptr, indices, values = kernels.spgemm_arrays(
        a.shape, a.indptr, a.indices, a.values, b.shape, b.indptr, b.indices, b.values
    )
    return SparseMatrix.from_arrays(
        (a.shape[0], b.shape[1]), indptr, indices, values, validate=False
    )


def matmul_dense(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """a @ x for a dense 2-d x."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if a.shape[1] != x.shape[0]:
        raise ValidationError(f"matmul shape mismatch {a.shape} @ {x.shape}")
    out = kernels.csr_dense_matmul(a.shape, a.indptr, a.indices, a.values, x)
    return out[:, 0] if squeeze else out


def add(a: SparseMatrix, b: SparseMatrix, beta=1.0) -> SparseMatrix:
    """a + beta * b."""
    if a.shape != b.shape:
        raise ValidationError("add shape mismatch")
    rows_a = np.repeat(np.arange(a.shape[0]), np.diff(a.indptr))
    rows_b = np.repeat(np.arange(b.shape[0]), np.diff(b.indptr))
    return SparseMatrix.from_coo(
        a.shape,
        np.concatenate([rows_a, rows_b]),
        np.concatenate([a.indices, b.indices]),
        np.concatenate([a.values, beta * b.values]),
    )


def relu_sub(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Entrywise max(a - b, 0) over the union support, then compacted."""
    if a.shape != b.shape:
        raise ValidationError("relu_sub shape mismatch")
    diff = add(a, b, beta=-1.0)
    vals = np.maximum(diff.values, 0.0)
    return SparseMatrix.from_arrays(diff.shape, diff.indptr, diff.indices, vals, validate=False)


def sym_normalize(adj: SparseMatrix) -> SparseMatrix:
    """Degree-normalized operator with self-loops.

    Input must be square, symmetric, binary, with an empty diagonal. Output
    entry (u, v) is (A + I)_{uv} / sqrt((deg_u + 1) (deg_v + 1)).
    """
    n, m = adj.shape
    if n != m:
        raise ValidationError("sym_normalize requires a square matrix")
    if np.any(adj.diagonal() != 0.0):
        raise ValidationError("adjacency must have an empty diagonal")
    if adj.nnz and not np.all(adj.values == 1.0):
        raise ValidationError("adjacency must be binary")
    t = adj.transpose()
    if not (
        np.array_equal(adj.indptr, t.indptr)
        and np.array_equal(adj.indices, t.indices)
        and np.array_equal(adj.values, t.values)
    ):
        raise ValidationError("adjacency must be symmetric")
    deg = np.diff(adj.indptr).astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg + 1.0)
    with_loops = add(adj, SparseMatrix.identity(n))
    rows = np.repeat(np.arange(n), np.diff(with_loops.indptr))
    vals = with_loops.values * inv_sqrt[rows] * inv_sqrt[with_loops.indices]
    return with_loops.with_values(vals)


def row_normalize(a: SparseMatrix) -> SparseMatrix:
    """Scale each row to sum to one; rows that sum to zero are left empty.

    Requires nonnegative values.
    """
    if a.nnz and a.values.min() < 0.0:
        raise ValidationError("row_normalize requires nonnegative values")
    sums = a.row_sums()
    scale = np.where(sums > 0.0, 1.0 / np.where(sums > 0.0, sums, 1.0), 0.0)
    vals = a.values * np.repeat(scale, np.diff(a.indptr))
    return SparseMatrix.from_arrays(a.shape, a.indptr, a.indices, vals, validate=False)


# ---------------------------------------------------------------------------
# truncated randomized SVD


@dataclass(frozen=True)
class SvdFactors:
    """Rank-r factorization A ~ u @ diag(sigma) @ v.T.

    u is (n x r), sigma (r,) nonincreasing and nonnegative, v (m x r);
    both factor matrices have unit columns.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.shape[0])

    def check(self, tol=1e-8):
        if np.any(self.sigma < 0):
            raise ValidationError("singular values must be nonnegative")
        if np.any(np.diff(self.sigma) > 0):
            raise ValidationError("singular values must be nonincreasing")
        for mat, name in ((self.u, "u"), (self.v, "v")):
            norms = np.linalg.norm(mat, axis=0)
            if np.any(np.abs(norms - 1.0) > tol):
                raise ValidationError(f"{name} columns must have unit norm")


def truncated_svd(
    a: SparseMatrix,
    rank: int,
    seed: int,
    oversample: int = 10,
    power_iters: int = 4,
    residual_tol: float | None = None,
) -> SvdFactors:
    """Randomized truncated SVD by seeded subspace iteration.

    Sketches with a Gaussian test matrix, runs ``power_iters`` rounds of
    orthonormalized power iteration, then solves the small dense problem.
    With ``residual_tol`` set, raises SvdConvergenceError when the estimated
    spectral residual ||A - A_r|| (the next singular value of the sketched
    problem) exceeds ``residual_tol``.
    """
    n, m = a.shape
    if rank < 1 or rank > min(n, m):
        raise ValidationError(f"rank must be in [1, {min(n, m)}]")
    rng = np.random.default_rng(seed)
    k = min(rank + oversample, min(n, m))
    at = a.transpose()
    sketch = rng.standard_normal((m, k))
    y = matmul_dense(a, sketch)
    q, _ = np.linalg.qr(y)
    for _ in range(power_iters):
        z = matmul_dense(at, q)
        z, _ = np.linalg.qr(z)
        y = matmul_dense(a, z)
        q, _ = np.linalg.qr(y)
    b = matmul_dense(at, q).T  # q.T @ a, computed without densifying a
    ub, s, vt = np.linalg.svd(b, full_matrices=False)
    if residual_tol is not None:
        residual = float(s[rank]) if s.shape[0] > rank else 0.0
        if residual > residual_tol:
            raise SvdConvergenceError(residual, residual_tol, rank)
    u = q @ ub[:, :rank]
    # canonical sign: largest-magnitude entry of each left vector is positive
    for j in range(rank):
        p = int(np.argmax(np.abs(u[:, j])))
        if u[p, j] < 0:
            u[:, j] = -u[:, j]
            vt[j] = -vt[j]
    return SvdFactors(u=u, sigma=s[:rank].copy(), v=vt[:rank].T.copy())
