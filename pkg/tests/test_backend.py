"""Backend selection and numba/numpy kernel parity."""

import numpy as np
import pytest

from adaptcs import kernels
from adaptcs.backend import NUMBA_IMPORTABLE, active_backend, set_backend
from adaptcs.errors import UsageError
from adaptcs.sparse import matmul_dense, spgemm, sym_normalize

from conftest import random_graph


@pytest.fixture(autouse=True)
def restore_backend():
    yield
    set_backend("auto")


def test_set_backend_rejects_unknown_name():
    with pytest.raises(UsageError):
        set_backend("cuda")


def test_numpy_backend_always_available():
    assert set_backend("numpy") == "numpy"
    assert active_backend() == "numpy"


def test_auto_prefers_numba_when_importable():
    resolved = set_backend("auto")
    assert resolved == ("numba" if NUMBA_IMPORTABLE else "numpy")


@pytest.mark.skipif(not NUMBA_IMPORTABLE, reason="numba not installed")
def test_backends_agree_on_kernels(rng):
    g = random_graph(rng, 60, p=0.15)
    a = sym_normalize(g.adj)
    x = rng.normal(size=(60, 7))

    outputs = {}
    for backend in ("numpy", "numba"):
        set_backend(backend)
        prod = spgemm(a, a)
        outputs[backend] = {
            "spgemm_indptr": prod.indptr.copy(),
            "spgemm_indices": prod.indices.copy(),
            "spgemm_values": prod.values.copy(),
            "spmm": matmul_dense(a, x),
            "sddmm": kernels.sddmm(a.shape, a.indptr, a.indices, x, x),
            "bfs": kernels.bfs_distances(g.n, g.adj.indptr, g.adj.indices, 0),
        }

    np_out, nb_out = outputs["numpy"], outputs["numba"]
    assert np.array_equal(np_out["spgemm_indptr"], nb_out["spgemm_indptr"])
    assert np.array_equal(np_out["spgemm_indices"], nb_out["spgemm_indices"])
    assert np.allclose(np_out["spgemm_values"], nb_out["spgemm_values"], atol=1e-12)
    assert np.allclose(np_out["spmm"], nb_out["spmm"], atol=1e-12)
    assert np.allclose(np_out["sddmm"], nb_out["sddmm"], atol=1e-12)
    assert np.array_equal(np_out["bfs"], nb_out["bfs"])
