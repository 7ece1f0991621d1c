import os

import numpy as np
import pytest

from adaptcs.graph import Graph
from adaptcs.sparse import SparseMatrix

DATA_ROOT = os.path.join(os.path.dirname(__file__), "..", "data")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def data_path(name: str) -> str:
    return os.path.join(DATA_ROOT, name)


def has_dataset(name: str) -> bool:
    root = data_path(name)
    return all(
        os.path.exists(os.path.join(root, f))
        for f in ("edges.tsv", "features.csv", "labels.csv")
    )


def require_dataset(name: str):
    if not has_dataset(name):
        pytest.skip(f"dataset {name} not fetched (run scripts/fetch_datasets.py)")


def load_real(name: str, seed: int = 0):
    from adaptcs.graph import load_dataset

    require_dataset(name)
    root = data_path(name)
    return load_dataset(
        os.path.join(root, "edges.tsv"),
        os.path.join(root, "features.csv"),
        os.path.join(root, "labels.csv"),
        seed=seed,
        name=name,
    )


def random_sparse(rng: np.random.Generator, n_rows: int, n_cols: int, density: float) -> SparseMatrix:
    dense = rng.normal(size=(n_rows, n_cols))
    dense[rng.random((n_rows, n_cols)) >= density] = 0.0
    return SparseMatrix.from_dense(dense)


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return Graph.from_pairs(n, iu[keep], ju[keep])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
