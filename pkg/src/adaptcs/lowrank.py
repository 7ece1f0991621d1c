"""Low-rank latent hop features.

Instead of materializing hop operators, factor the normalized adjacency once
as A ~ U S V^T and express every hop-k feature block through spectral powers:
X^(k) ~ U (G_k - G_(k-1)) (V^T X) with G_k = S (V^T U S)^(k-1). The mixing
matrix V^T U makes repeated application exact: for a symmetric operator with
negative eigenvalues, V carries the signs that plain diagonal powers S^k
would lose, so at full rank the latent features reproduce A^k X to roundoff.
When the spectrum is nonnegative V^T U = I and G_k collapses to the diagonal
S^k. The projection V^T X is computed once and shared across hops. Hop 1
uses G_1 = S itself so the channel approximates A (the hop-1 operator),
matching the exact path's boundary.

Unlike the exact adaptive channel, the signed difference is NOT rectified:
a ReLU has no low-rank expression. The gap is measured in tests rather than
hidden.

Per-hop work allocates O(n r + r d + r^2) beyond inputs and never forms an
n x n array.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ValidationError
from .hops import matrix_hash
from .sparse import SparseMatrix, SvdFactors, truncated_svd


@dataclass(frozen=True)
class LatentHopPlan:
    """SVD factors plus the shared feature projection for K latent hops."""

    svd: SvdFactors
    projected_features: np.ndarray  # V^T X, r x d
    k_max: int
    mix: np.ndarray = None  # V^T U, r x r spectral mixing matrix

    @property
    def rank(self) -> int:
        return self.svd.rank

    def check(self):
        if self.k_max < 1:
            raise ValidationError("k_max must be at least 1")
        if self.projected_features.shape[0] != self.svd.rank:
            raise ValidationError("projected_features must have r rows")
        if self.mix is None or self.mix.shape != (self.svd.rank, self.svd.rank):
            raise ValidationError("mix must be the r x r matrix V^T U")


def build_plan(
    a_hat: SparseMatrix,
    x: np.ndarray,
    rank: int,
    k_max: int,
    seed: int,
    factors: SvdFactors | None = None,
) -> LatentHopPlan:
    """Factor the operator (or accept cached factors) and project features."""
    if x.shape[0] != a_hat.shape[0]:
        raise ValidationError("feature row count must match operator")
    if factors is None:
        factors = truncated_svd(a_hat, rank=rank, seed=seed)
    plan = LatentHopPlan(
        svd=factors,
        projected_features=factors.v.T @ x,
        k_max=k_max,
        mix=factors.v.T @ factors.u,
    )
    plan.check()
    return plan


def delta_sigma(plan: LatentHopPlan, k: int) -> np.ndarray:
    """Hop transfer matrix G_k - G_(k-1) in the rank-r latent space.

    G_k = S (V^T U S)^(k-1) so that A^k = U G_k V^T exactly at full rank;
    the hop-1 boundary returns G_1 = diag(sigma). Dense r x r output.
    """
    if not 1 <= k <= plan.k_max:
        raise ValidationError(f"hop {k} outside [1, {plan.k_max}]")
    s = plan.svd.sigma
    if k == 1:
        return np.diag(s)
    step = plan.mix * s[None, :]  # (V^T U) S
    acc = np.linalg.matrix_power(step, k - 2)
    g_prev = s[:, None] * acc
    g_k = s[:, None] * (acc @ step)
    return g_k - g_prev


def latent_hop_features(plan: LatentHopPlan, k: int) -> np.ndarray:
    """U (G_k - G_(k-1)) (V^T X) for hop k, an n x d matrix."""
    delta = delta_sigma(plan, k)
    return plan.svd.u @ (delta @ plan.projected_features)


def renorm_weights(plan: LatentHopPlan, k: int) -> np.ndarray:
    """Global per-node weights w = sigmoid(U dG V^T 1), each in (0, 1)."""
    delta = delta_sigma(plan, k)
    v_mass = plan.svd.v.sum(axis=0)  # V^T 1
    z = plan.svd.u @ (delta @ v_mass)
    return 1.0 / (1.0 + np.exp(-z))


def global_renorm(plan: LatentHopPlan, k: int, features: np.ndarray) -> np.ndarray:
    """Scale hop-k features row-wise by the global renormalization weights."""
    if features.shape[0] != plan.svd.u.shape[0]:
        raise ValidationError("features row count must match plan")
    return renorm_weights(plan, k)[:, None] * features


# ---------------------------------------------------------------------------
# factor cache

CACHE_MAGIC = b"ASVD"
CACHE_VERSION = 1


def svd_cache_key(a_hat: SparseMatrix, rank: int, seed: int) -> str:
    return hashlib.sha256(
        f"{matrix_hash(a_hat)}:{rank}:{seed}".encode()
    ).hexdigest()[:24]


def write_svd_cache(path: str, factors: SvdFactors):
    n = factors.u.shape[0]
    m = factors.v.shape[0]
    r = factors.rank
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", CACHE_VERSION))
        fh.write(struct.pack("<qqq", n, m, r))
        fh.write(np.ascontiguousarray(factors.u).astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(factors.sigma).astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(factors.v).astype("<f8").tobytes())


def read_svd_cache(path: str) -> SvdFactors:
    with open(path, "rb") as fh:
        if fh.read(4) != CACHE_MAGIC:
            raise ParseError("bad magic bytes", path)
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CACHE_VERSION:
            raise ParseError(f"unsupported cache version {version}", path)
        n, m, r = struct.unpack("<qqq", fh.read(24))
        u = np.frombuffer(fh.read(8 * n * r), dtype="<f8").reshape(n, r).astype(np.float64)
        sigma = np.frombuffer(fh.read(8 * r), dtype="<f8").astype(np.float64)
        v = np.frombuffer(fh.read(8 * m * r), dtype="<f8").reshape(m, r).astype(np.float64)
    factors = SvdFactors(u=u, sigma=sigma, v=v)
    factors.check()
    return factors
