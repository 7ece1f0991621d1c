"""Low-rank latent hop features: fidelity, renorm weights, factor cache."""

import numpy as np
import pytest

from adaptcs.errors import ParseError, ValidationError
from adaptcs.lowrank import (
    LatentHopPlan,
    build_plan,
    delta_sigma,
    global_renorm,
    latent_hop_features,
    read_svd_cache,
    renorm_weights,
    svd_cache_key,
    write_svd_cache,
)
from adaptcs.sparse import sym_normalize, truncated_svd
from adaptcs.synth import er_graph

from conftest import random_graph


def dense_signed_hop(a_dense: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """(A^k - A^(k-1)) X without rectification; A X at the hop-1 boundary."""
    if k == 1:
        return a_dense @ x
    return (np.linalg.matrix_power(a_dense, k) - np.linalg.matrix_power(a_dense, k - 1)) @ x


# ---------------------------------------------------------------------------
# fidelity


def test_full_rank_features_match_dense(rng):
    for n in (20, 60, 100):
        g = random_graph(rng, n, p=0.15)
        a_hat = sym_normalize(g.adj)
        x = rng.normal(size=(n, 7))
        plan = build_plan(a_hat, x, rank=n, k_max=5, seed=0)
        dense = a_hat.to_dense()
        for k in range(1, 6):
            want = dense_signed_hop(dense, x, k)
            got = latent_hop_features(plan, k)
            denom = max(np.linalg.norm(want), 1e-30)
            assert np.linalg.norm(got - want) / denom < 1e-6


def test_fidelity_monotone_in_rank(rng):
    n = 64
    g = random_graph(rng, n, p=0.2)
    a_hat = sym_normalize(g.adj)
    x = rng.normal(size=(n, 6))
    dense = a_hat.to_dense()
    for k in (1, 3, 5):
        want = dense_signed_hop(dense, x, k)
        errs = []
        for r in (5, 10, 20, n):
            plan = build_plan(a_hat, x, rank=r, k_max=5, seed=0)
            got = latent_hop_features(plan, k)
            errs.append(np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-30))
        for lo, hi in zip(errs[1:], errs[:-1]):
            assert lo <= hi + 1e-9, errs


def test_hop1_boundary_uses_sigma_itself(rng):
    g = random_graph(rng, 30, p=0.2)
    a_hat = sym_normalize(g.adj)
    plan = build_plan(a_hat, rng.normal(size=(30, 4)), rank=30, k_max=3, seed=0)
    assert np.array_equal(delta_sigma(plan, 1), np.diag(plan.svd.sigma))
    # at full rank U dG_2 V^T reproduces the dense signed hop operator
    dense = a_hat.to_dense()
    d2 = plan.svd.u @ delta_sigma(plan, 2) @ plan.svd.v.T
    assert np.allclose(d2, dense @ dense - dense, atol=1e-8)


def test_delta_sigma_range_checked(rng):
    g = random_graph(rng, 10, p=0.3)
    plan = build_plan(sym_normalize(g.adj), rng.normal(size=(10, 2)), rank=5, k_max=2, seed=0)
    with pytest.raises(ValidationError):
        delta_sigma(plan, 0)
    with pytest.raises(ValidationError):
        delta_sigma(plan, 3)


def test_projected_features_shared_across_hops(rng):
    # the r x d projection is computed once; hop features reuse it
    g = random_graph(rng, 24, p=0.25)
    a_hat = sym_normalize(g.adj)
    x = rng.normal(size=(24, 5))
    plan = build_plan(a_hat, x, rank=8, k_max=4, seed=3)
    assert plan.projected_features.shape == (8, 5)
    assert np.allclose(plan.projected_features, plan.svd.v.T @ x)


def test_build_plan_accepts_cached_factors(rng):
    g = random_graph(rng, 20, p=0.3)
    a_hat = sym_normalize(g.adj)
    x = rng.normal(size=(20, 3))
    factors = truncated_svd(a_hat, rank=6, seed=1)
    plan = build_plan(a_hat, x, rank=6, k_max=2, seed=999, factors=factors)
    assert plan.svd is factors


def test_build_plan_validates_rows(rng):
    g = random_graph(rng, 12, p=0.3)
    with pytest.raises(ValidationError):
        build_plan(sym_normalize(g.adj), rng.normal(size=(11, 3)), rank=4, k_max=2, seed=0)
    with pytest.raises(ValidationError):
        LatentHopPlan(
            svd=truncated_svd(sym_normalize(g.adj), rank=4, seed=0),
            projected_features=np.zeros((3, 2)),
            k_max=2,
        ).check()


# ---------------------------------------------------------------------------
# memory contract: latent hops never form an n x n array


def test_latent_path_peak_allocation_stays_linear(rng):
    # indirect but effective: feature computation on n=4000 with r=8 must
    # stay well under the 128 MB an n x n float64 array would need
    import tracemalloc

    g = er_graph(4000, 0.001, seed=5)
    a_hat = sym_normalize(g.adj)
    x = rng.normal(size=(4000, 4))
    plan = build_plan(a_hat, x, rank=8, k_max=5, seed=0)
    tracemalloc.start()
    for k in range(1, 6):
        latent_hop_features(plan, k)
        renorm_weights(plan, k)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    assert peak < 32 * 1024 * 1024


# ---------------------------------------------------------------------------
# renorm weights


def test_renorm_weights_match_dense_oracle(rng):
    g = random_graph(rng, 40, p=0.2)
    a_hat = sym_normalize(g.adj)
    x = rng.normal(size=(40, 3))
    plan = build_plan(a_hat, x, rank=40, k_max=4, seed=0)
    dense = a_hat.to_dense()
    ones = np.ones(40)
    for k in range(1, 5):
        if k == 1:
            z = dense @ ones
        else:
            z = (np.linalg.matrix_power(dense, k) - np.linalg.matrix_power(dense, k - 1)) @ ones
        want = 1.0 / (1.0 + np.exp(-z))
        got = renorm_weights(plan, k)
        assert np.allclose(got, want, atol=1e-8)
        assert np.all((got > 0.0) & (got < 1.0))


def test_global_renorm_scales_rows(rng):
    g = random_graph(rng, 16, p=0.3)
    a_hat = sym_normalize(g.adj)
    x = rng.normal(size=(16, 5))
    plan = build_plan(a_hat, x, rank=8, k_max=2, seed=0)
    feats = latent_hop_features(plan, 2)
    scaled = global_renorm(plan, 2, feats)
    w = renorm_weights(plan, 2)
    assert np.allclose(scaled, w[:, None] * feats)
    with pytest.raises(ValidationError):
        global_renorm(plan, 2, np.zeros((15, 5)))


# ---------------------------------------------------------------------------
# factor cache


def test_svd_cache_roundtrip(tmp_path, rng):
    g = random_graph(rng, 30, p=0.2)
    factors = truncated_svd(sym_normalize(g.adj), rank=10, seed=4)
    path = str(tmp_path / "factors.asvd")
    write_svd_cache(path, factors)
    back = read_svd_cache(path)
    assert np.array_equal(back.u, factors.u)
    assert np.array_equal(back.sigma, factors.sigma)
    assert np.array_equal(back.v, factors.v)


def test_svd_cache_rejects_bad_magic(tmp_path):
    path = str(tmp_path / "junk.asvd")
    with open(path, "wb") as fh:
        fh.write(b"JUNK" + b"\x00" * 32)
    with pytest.raises(ParseError):
        read_svd_cache(path)


def test_svd_cache_key_sensitivity(rng):
    g = random_graph(rng, 15, p=0.3)
    a_hat = sym_normalize(g.adj)
    base = svd_cache_key(a_hat, 5, 0)
    assert base == svd_cache_key(a_hat, 5, 0)
    assert base != svd_cache_key(a_hat, 6, 0)
    assert base != svd_cache_key(a_hat, 5, 1)
