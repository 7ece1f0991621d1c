"""Low-level CSR kernels with numba and numpy/scipy implementations.

Every public function here dispatches on :func:`adaptcs.backend.active_backend`.
The numba path is a hand-written jitted loop; the fallback path is vectorized
numpy, leaning on scipy.sparse for the two matmul-shaped kernels where a
mature implementation already exists. Both paths produce CSR arrays with
sorted, duplicate-free column indices so results are interchangeable.

Array conventions: indptr/indices are int64, values float64, all C-contiguous.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .backend import NUMBA_IMPORTABLE, active_backend

if NUMBA_IMPORTABLE:
    from numba import njit
else:  # pragma: no cover - exercised only when numba is absent

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# sparse * sparse (Gustavson two-pass with a dense accumulator per row)


@njit(cache=True)
def _spgemm_count_nb(n_rows, n_cols, a_indptr, a_indices, b_indptr, b_indices):
    marker = np.full(n_cols, -1, dtype=np.int64)
    out_indptr = np.zeros(n_rows + 1, dtype=np.int64)
    for i in range(n_rows):
        count = 0
        for pa in range(a_indptr[i], a_indptr[i + 1]):
            k = a_indices[pa]
            for pb in range(b_indptr[k], b_indptr[k + 1]):
                j = b_indices[pb]
                if marker[j] != i:
                    marker[j] = i
                    count += 1
        out_indptr[i + 1] = out_indptr[i] + count
    return out_indptr


@njit(cache=True)
def _spgemm_fill_nb(
    n_rows,
    n_cols,
    a_indptr,
    a_indices,
    a_values,
    b_indptr,
    b_indices,
    b_values,
    out_indptr,
):
    nnz = out_indptr[n_rows]
    out_indices = np.empty(nnz, dtype=np.int64)
    out_values = np.empty(nnz, dtype=np.float64)
    acc = np.zeros(n_cols, dtype=np.float64)
    marker = np.full(n_cols, -1, dtype=np.int64)
    colbuf = np.empty(n_cols, dtype=np.int64)
    for i in range(n_rows):
        count = 0
        for pa in range(a_indptr[i], a_indptr[i + 1]):
            k = a_indices[pa]
            av = a_values[pa]
            for pb in range(b_indptr[k], b_indptr[k + 1]):
                j = b_indices[pb]
                if marker[j] != i:
                    marker[j] = i
                    colbuf[count] = j
                    count += 1
                    acc[j] = av * b_values[pb]
                else:
                    acc[j] += av * b_values[pb]
        cols = np.sort(colbuf[:count])
        base = out_indptr[i]
        for t in range(count):
            c = cols[t]
            out_indices[base + t] = c
            out_values[base + t] = acc[c]
    return out_indices, out_values


def spgemm_arrays(shape_a, a_indptr, a_indices, a_values, shape_b, b_indptr, b_indices, b_values):
    """CSR product A @ B on raw arrays; returns (indptr, indices, values)."""
    n_rows, inner = shape_a
    n_cols = shape_b[1]
    if active_backend() == "numba":
        out_indptr = _spgemm_count_nb(n_rows, n_cols, a_indptr, a_indices, b_indptr, b_indices)
        out_indices, out_values = _spgemm_fill_nb(
            n_rows, n_cols, a_indptr, a_indices, a_values, b_indptr, b_indices, b_values, out_indptr
        )
        return out_indptr, out_indices, out_values
    a = sp.csr_matrix((a_values, a_indices, a_indptr), shape=shape_a)
    b = sp.csr_matrix((b_values, b_indices, b_indptr), shape=shape_b)
    c = (a @ b).tocsr()
    c.sort_indices()
    return (
        c.indptr.astype(np.int64),
        c.indices.astype(np.int64),
        c.data.astype(np.float64),
    )


# ---------------------------------------------------------------------------
# sparse * dense


@njit(cache=True)
def _csr_dense_nb(n_rows, indptr, indices, values, dense, out):
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            v = values[p]
            j = indices[p]
            for c in range(dense.shape[1]):
                out[i, c] += v * dense[j, c]
    return out


def csr_dense_matmul(shape, indptr, indices, values, dense):
    """CSR @ dense -> dense. dense must be 2-d float64."""
    n_rows = shape[0]
    if active_backend() == "numba":
        out = np.zeros((n_rows, dense.shape[1]), dtype=np.float64)
        return _csr_dense_nb(n_rows, indptr, indices, values, np.ascontiguousarray(dense), out)
    a = sp.csr_matrix((values, indices, indptr), shape=shape)
    return np.asarray(a @ dense, dtype=np.float64)


# ---------------------------------------------------------------------------
# CSR transpose (counting sort: output rows sorted because input rows are scanned in order)


@njit(cache=True)
def _transpose_nb(n_rows, n_cols, indptr, indices, values):
    nnz = indptr[n_rows]
    t_indptr = np.zeros(n_cols + 1, dtype=np.int64)
    for p in range(nnz):
        t_indptr[indices[p] + 1] += 1
    for j in range(n_cols):
        t_indptr[j + 1] += t_indptr[j]
    cursor = t_indptr[:-1].copy()
    t_indices = np.empty(nnz, dtype=np.int64)
    t_values = np.empty(nnz, dtype=np.float64)
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            q = cursor[j]
            t_indices[q] = i
            t_values[q] = values[p]
            cursor[j] = q + 1
    return t_indptr, t_indices, t_values


def csr_transpose(shape, indptr, indices, values):
    """Transpose CSR arrays; returns (indptr, indices, values) of the n_cols x n_rows result."""
    n_rows, n_cols = shape
    if active_backend() == "numba":
        return _transpose_nb(n_rows, n_cols, indptr, indices, values)
    a = sp.csr_matrix((values, indices, indptr), shape=shape)
    t = a.T.tocsr()
    t.sort_indices()
    return (
        t.indptr.astype(np.int64),
        t.indices.astype(np.int64),
        t.data.astype(np.float64),
    )


# ---------------------------------------------------------------------------
# sampled dense-dense product: out[e] = left[row(e)] . right[col(e)]


@njit(cache=True)
def _sddmm_nb(n_rows, indptr, indices, left, right, out):
    for i in range(n_rows):
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            acc = 0.0
            for c in range(left.shape[1]):
                acc += left[i, c] * right[j, c]
            out[p] = acc
    return out


def sddmm(shape, indptr, indices, left, right):
    """Dot product of left rows and right rows sampled on a CSR support."""
    n_rows = shape[0]
    nnz = int(indptr[n_rows])
    if active_backend() == "numba":
        out = np.empty(nnz, dtype=np.float64)
        return _sddmm_nb(
            n_rows,
            indptr,
            indices,
            np.ascontiguousarray(left),
            np.ascontiguousarray(right),
            out,
        )
    if nnz == 0:
        return np.empty(0, dtype=np.float64)
    rows = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(indptr))
    cols = indices[:nnz]
    # chunk the gathers so the nnz-by-dim intermediates stay tens of MB
    out = np.empty(nnz, dtype=np.float64)
    step = max(1, (1 << 22) // max(left.shape[1], 1))
    for lo in range(0, nnz, step):
        hi = min(lo + step, nnz)
        out[lo:hi] = np.einsum(
            "eh,eh->e", left[rows[lo:hi]], right[cols[lo:hi]]
        )
    return out


# ---------------------------------------------------------------------------
# per-row sums


@njit(cache=True)
def _row_sums_nb(n_rows, indptr, values):
    out = np.zeros(n_rows, dtype=np.float64)
    for i in range(n_rows):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += values[p]
        out[i] = acc
    return out


def row_sums(n_rows, indptr, values):
    if active_backend() == "numba":
        return _row_sums_nb(n_rows, indptr, values)
    sums = np.zeros(n_rows, dtype=np.float64)
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    if nonempty.size:
        # reduceat segments run between consecutive nonempty row starts, so
        # empty rows in between contribute nothing and stay exactly zero
        sums[nonempty] = np.add.reduceat(values, indptr[:-1][nonempty])
    return sums


# ---------------------------------------------------------------------------
# breadth-first search


@njit(cache=True)
def _bfs_dist_nb(n, indptr, indices, src):
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    dist[src] = 0
    queue[0] = src
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u]
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if dist[v] < 0:
                dist[v] = du + 1
                queue[tail] = v
                tail += 1
    return dist


def bfs_distances(n, indptr, indices, src):
    """Hop distance from src to every node; -1 for unreachable."""
    if active_backend() == "numba":
        return _bfs_dist_nb(n, indptr, indices, int(src))
    dist = np.full(n, -1, dtype=np.int64)
    dist[src] = 0
    frontier = np.array([src], dtype=np.int64)
    d = 0
    while frontier.size:
        chunks = [indices[indptr[u] : indptr[u + 1]] for u in frontier]
        neigh = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
        neigh = neigh[dist[neigh] < 0]
        if neigh.size == 0:
            break
        frontier = np.unique(neigh)
        d += 1
        dist[frontier] = d
    return dist


@njit(cache=True)
def _bfs_batch_nb(indptr, indices, visited, queue, head, tail, order, need):
    taken = 0
    while head < tail and taken < need:
        u = queue[head]
        head += 1
        order[taken] = u
        taken += 1
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if not visited[v]:
                visited[v] = True
                queue[tail] = v
                tail += 1
    return taken, head, tail


def bfs_batch(indptr, indices, visited, queue, head, tail, need):
    """Dequeue up to ``need`` nodes in BFS order, enqueueing unvisited neighbors.

    ``visited`` marks enqueued nodes. Neighbors are pushed in adjacency order,
    which is ascending when the CSR indices are sorted. Returns the array of
    dequeued nodes plus the updated (head, tail) cursors into ``queue``.
    """
    order = np.empty(need, dtype=np.int64)
    if active_backend() == "numba":
        taken, head, tail = _bfs_batch_nb(indptr, indices, visited, queue, head, tail, order, need)
        return order[:taken], head, tail
    taken = 0
    while head < tail and taken < need:
        u = queue[head]
        head += 1
        order[taken] = u
        taken += 1
        for v in indices[indptr[u] : indptr[u + 1]]:
            if not visited[v]:
                visited[v] = True
                queue[tail] = v
                tail += 1
    return order[:taken], head, tail


# ---------------------------------------------------------------------------
# core numbers (peeling in degree order)


@njit(cache=True)
def _core_numbers_nb(n, indptr, indices):
    deg = np.empty(n, dtype=np.int64)
    maxdeg = 0
    for u in range(n):
        deg[u] = indptr[u + 1] - indptr[u]
        if deg[u] > maxdeg:
            maxdeg = deg[u]
    # bucket sort nodes by degree
    bin_start = np.zeros(maxdeg + 2, dtype=np.int64)
    for u in range(n):
        bin_start[deg[u] + 1] += 1
    for d in range(maxdeg + 1):
        bin_start[d + 1] += bin_start[d]
    pos = np.empty(n, dtype=np.int64)
    vert = np.empty(n, dtype=np.int64)
    cursor = bin_start[:-1].copy()
    for u in range(n):
        pos[u] = cursor[deg[u]]
        vert[pos[u]] = u
        cursor[deg[u]] += 1
    core = deg.copy()
    for idx in range(n):
        u = vert[idx]
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if core[v] > core[u]:
                dv = core[v]
                pv = pos[v]
                pw = bin_start[dv]
                w = vert[pw]
                if v != w:
                    vert[pv] = w
                    vert[pw] = v
                    pos[v] = pw
                    pos[w] = pv
                bin_start[dv] += 1
                core[v] -= 1
    return core


def core_numbers(n, indptr, indices):
    """Core number of every node of a simple undirected graph."""
    if active_backend() == "numba":
        return _core_numbers_nb(n, indptr, indices)
    deg = np.diff(indptr).astype(np.int64)
    core = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    work = deg.copy()
    k = 0
    remaining = n
    while remaining:
        k = max(k, int(work[alive].min()))
        while True:
            drop = np.flatnonzero(alive & (work <= k))
            if drop.size == 0:
                break
            core[drop] = k
            alive[drop] = False
            remaining -= drop.size
            for u in drop:
                nb = indices[indptr[u] : indptr[u + 1]]
                work[nb] -= 1
        k += 1
    return core
