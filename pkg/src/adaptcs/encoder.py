"""Trainable encoder: per-hop transforms, frequency attention, hop fusion.

Architecture, per forward pass:

1. Project raw features once: P_LP = X W_LP, P_HP = X W_HP.
2. For each hop k >= 1 obtain branch activations
   H_LP = ReLU(T_k P_LP), H_HP = ReLU(T_k^HP-form P_HP) where the hop
   operator application depends on the channel source (raw operators,
   attention-reweighted operators, or the low-rank latent expansion).
   Hop 0 is the raw-feature channel H0 = ReLU(P_LP); it has no high-pass
   branch (its Laplacian response is identically zero).
3. Per hop, fuse the two branches with a per-node 2-way softmax gate scored
   by two learned vectors.
4. Fuse hops: either concatenate hops 0..K through one linear+ReLU map
   ("mlp"), or gate hops 1..K with class-bank attention ("bank"); the bank
   path classifies via similarity to the bank prototypes.

Gradients are exact reverse-mode derivations of the forward code, checked
against central finite differences in the tests. The attention anchor
embedding (h in the edge-attention sigma((Wh_i).(Wh_j))) is refreshed from
the current W_LP once per epoch and treated as a constant by the gradient;
W_renorm itself is differentiated through the attention exactly.

Training is deterministic full-batch gradient descent with seeded inverted
dropout regenerated each epoch.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import (
    TrainingDivergenceError,
    UndefinedMetricError,
    UsageError,
    ValidationError,
)
from .graph import TRAIN, VAL, DataSet
from .hops import DEFAULT_NNZ_BUDGET, build_operators, matrix_hash
from .lowrank import LatentHopPlan, build_plan, delta_sigma, renorm_weights
from .search import unit_rows
from .sparse import SparseMatrix, matmul_dense, row_normalize, sym_normalize


@dataclass(frozen=True)
class EncoderConfig:
    """Hyperparameters; defaults follow the reference protocol."""

    k_max: int = 5
    hidden: int = 512
    mask_mode: str = "adaptive"  # hard | adaptive
    weighting: str = "local_attention"  # raw | local_attention | global
    fusion: str = "bank"  # bank | mlp
    rank: int | None = None  # None = exact operators; int = latent rank
    dropout: float = 0.5
    lr: float = 0.01
    epochs: int = 100
    patience: int = 20
    seed: int = 0
    class_temp: float = 1.0
    hop_temp: float = 1.0
    nnz_budget: int = DEFAULT_NNZ_BUDGET

    def check(self):
        if self.k_max < 0:
            raise ValidationError("k_max must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must lie in [0, 1)")
        if self.fusion not in ("bank", "mlp"):
            raise ValidationError(f"unknown fusion {self.fusion!r}")
        if self.fusion == "bank" and self.k_max < 1:
            raise ValidationError("bank fusion requires k_max >= 1")
        if self.mask_mode not in ("hard", "adaptive"):
            raise ValidationError(f"unknown mask mode {self.mask_mode!r}")
        if self.rank is None and self.weighting not in ("raw", "local_attention"):
            raise ValidationError("exact path weighting must be raw or local_attention")
        if self.rank is not None and self.weighting != "global":
            raise ValidationError("latent path supports only global weighting")


class EncoderState:
    """Parameter container; arrays are float64 and updated in place."""

    def __init__(self, config: EncoderConfig, d: int, c: int):
        config.check()
        self.config = config
        self.d = d
        self.c = c
        h = config.hidden
        rng = np.random.default_rng(config.seed)

        def init(shape):
            bound = 1.0 / np.sqrt(shape[0])
            return rng.uniform(-bound, bound, size=shape)

        self.w_lp = init((d, h))
        self.w_hp = init((d, h))
        self.w_renorm = init((h, h))
        self.a_lp = init((h,))
        self.a_hp = init((h,))
        if config.fusion == "mlp":
            self.w_hop = init(((config.k_max + 1) * h, c))
        else:
            self.bank_p = init((h, c))

    def params(self) -> dict[str, np.ndarray]:
        base = {
            "w_lp": self.w_lp,
            "w_hp": self.w_hp,
            "w_renorm": self.w_renorm,
            "a_lp": self.a_lp,
            "a_hp": self.a_hp,
        }
        if self.config.fusion == "mlp":
            base["w_hop"] = self.w_hop
        else:
            base["bank_p"] = self.bank_p
        return base

    def set_params(self, values: dict[str, np.ndarray]):
        for name, arr in values.items():
            getattr(self, name)[...] = arr

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params().items()}

    def check_finite(self, epoch: int):
        for name, arr in self.params().items():
            if not np.all(np.isfinite(arr)):
                raise TrainingDivergenceError(epoch, what=f"parameter {name}")


# ---------------------------------------------------------------------------
# channel sources


@dataclass
class ExactChannels:
    """Hop operators applied exactly; optional edge attention reweighting."""

    operators: list[SparseMatrix]
    x: np.ndarray
    weighting: str  # raw | local_attention
    h_embed: np.ndarray | None = None

    @property
    def k_max(self) -> int:
        return len(self.operators) - 1

    def refresh_anchor(self, state: EncoderState):
        """Recompute the attention anchor from the current hop-0 transform."""
        if self.weighting == "local_attention":
            self.h_embed = np.maximum(self.x @ state.w_lp, 0.0)


@dataclass
class LatentChannels:
    """Low-rank latent hop expansion with global renormalization weights."""

    plan: LatentHopPlan
    x: np.ndarray
    ud: list[np.ndarray] = field(default_factory=list)  # U @ delta_k per hop
    weights: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.ud:
            for k in range(1, self.plan.k_max + 1):
                delta = delta_sigma(self.plan, k)
                self.ud.append(self.plan.svd.u @ delta)
                self.weights.append(renorm_weights(self.plan, k))

    @property
    def k_max(self) -> int:
        return self.plan.k_max

    def refresh_anchor(self, state: EncoderState):
        pass


def prepare_channels(ds: DataSet, config: EncoderConfig) -> ExactChannels | LatentChannels:
    """Build the channel source named by the config from a dataset."""
    a_hat = sym_normalize(ds.graph.adj)
    if config.rank is None:
        operators = build_operators(a_hat, max(config.k_max, 1), config.mask_mode,
                                    config.nnz_budget)
        operators = operators[: config.k_max + 1]
        return ExactChannels(operators=operators, x=ds.features, weighting=config.weighting)
    plan = build_plan(a_hat, ds.features, rank=config.rank,
                      k_max=max(config.k_max, 1), seed=config.seed)
    return LatentChannels(plan=plan, x=ds.features)


# ---------------------------------------------------------------------------
# forward


@dataclass(frozen=True)
class EmbeddingTable:
    hidden: np.ndarray
    logits: np.ndarray
    unit_hidden: np.ndarray


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_rows_backward(d_out: np.ndarray, out: np.ndarray) -> np.ndarray:
    dot = (d_out * out).sum(axis=1, keepdims=True)
    return out * (d_out - dot)


class ForwardCache:
    """Intermediates needed by the exact backward pass."""

    def __init__(self):
        self.train_mode = False
        self.p_lp = None
        self.p_hp = None
        self.s_lp = []  # pre-ReLU per hop (0..K)
        self.s_hp = []  # pre-ReLU per hop (1..K at index k)
        self.h_lp = []
        self.h_hp = []
        self.gate_lp = []  # per hop >= 1: (n,) low-pass gate
        self.fused = []  # per hop 0..K post frequency fusion
        self.drop_masks = []
        self.dropped = []
        self.att = []  # per hop >= 1: dict of attention intermediates
        self.c_lp = None
        self.c_hp = None
        self.mlp_pre = None
        self.hcat = None
        self.bank = None
        self.hidden = None
        self.logits = None


def forward(
    state: EncoderState,
    channels: ExactChannels | LatentChannels,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    epoch: int = 0,
) -> tuple[EmbeddingTable, ForwardCache]:
    """Run the encoder; returns embeddings plus the gradient cache."""
    cfg = state.config
    if channels.k_max < cfg.k_max:
        raise ValidationError("channel hop count is smaller than configured k_max")
    x = channels.x
    n = x.shape[0]
    h = cfg.hidden
    cache = ForwardCache()
    cache.train_mode = train_mode

    p_lp = x @ state.w_lp
    p_hp = x @ state.w_hp
    cache.p_lp, cache.p_hp = p_lp, p_hp

    is_latent = isinstance(channels, LatentChannels)
    if is_latent:
        cache.c_lp = channels.plan.projected_features @ state.w_lp
        cache.c_hp = channels.plan.projected_features @ state.w_hp

    # hop 0: raw feature channel, low-pass only
    cache.s_lp.append(p_lp)
    cache.s_hp.append(None)
    h0 = np.maximum(p_lp, 0.0)
    cache.h_lp.append(h0)
    cache.h_hp.append(None)
    cache.gate_lp.append(None)
    cache.fused.append(h0)

    use_attention = (not is_latent) and channels.weighting == "local_attention"
    if use_attention:
        if channels.h_embed is None:
            raise UsageError("attention channels need refresh_anchor before forward")
        g = channels.h_embed @ state.w_renorm.T

    for k in range(1, cfg.k_max + 1):
        if is_latent:
            s_lp = channels.weights[k - 1][:, None] * (channels.ud[k - 1] @ cache.c_lp)
            s_hp = p_hp - channels.ud[k - 1] @ cache.c_hp
            cache.att.append(None)
        else:
            op = channels.operators[k]
            if use_attention:
                z = kernels.sddmm(op.shape, op.indptr, op.indices, g, g)
                alpha = expit(z)
                lp_vals = op.values * alpha
                hp_vals = op.values * (1.0 - alpha)
                lp_sums = kernels.row_sums(n, op.indptr, lp_vals)
                hp_sums = kernels.row_sums(n, op.indptr, hp_vals)
                lp_scale = np.where(lp_sums > 0, 1.0 / np.where(lp_sums > 0, lp_sums, 1.0), 0.0)
                hp_scale = np.where(hp_sums > 0, 1.0 / np.where(hp_sums > 0, hp_sums, 1.0), 0.0)
                rows = np.repeat(np.arange(n), np.diff(op.indptr))
                t_lp = op.with_values(lp_vals * lp_scale[rows])
                t_hp = op.with_values(hp_vals * hp_scale[rows])
                s_lp = matmul_dense(t_lp, p_lp)
                s_hp = matmul_dense(t_hp, p_hp)
                cache.att.append(
                    {
                        "alpha": alpha,
                        "t_lp": t_lp,
                        "t_hp": t_hp,
                        "lp_scale": lp_scale,
                        "hp_scale": hp_scale,
                        "rows": rows,
                        "g": g,
                    }
                )
            else:
                s_lp = matmul_dense(op, p_lp)
                s_hp = p_hp - matmul_dense(op, p_hp)
                cache.att.append(None)
        h_lp = np.maximum(s_lp, 0.0)
        h_hp = np.maximum(s_hp, 0.0)
        score_lp = h_lp @ state.a_lp
        score_hp = h_hp @ state.a_hp
        gate_lp = expit(score_lp - score_hp)  # 2-way softmax over two scores
        fused = gate_lp[:, None] * h_lp + (1.0 - gate_lp)[:, None] * h_hp
        cache.s_lp.append(s_lp)
        cache.s_hp.append(s_hp)
        cache.h_lp.append(h_lp)
        cache.h_hp.append(h_hp)
        cache.gate_lp.append(gate_lp)
        cache.fused.append(fused)

    # dropout (inverted, train mode only)
    keep = 1.0 - cfg.dropout
    for k in range(cfg.k_max + 1):
        if train_mode and cfg.dropout > 0.0:
            if rng is None:
                rng = np.random.default_rng((cfg.seed, epoch))
            mask = (rng.random(cache.fused[k].shape) < keep) / keep
            cache.drop_masks.append(mask)
            cache.dropped.append(cache.fused[k] * mask)
        else:
            cache.drop_masks.append(None)
            cache.dropped.append(cache.fused[k])

    if cfg.fusion == "mlp":
        hcat = np.concatenate(cache.dropped, axis=1)
        pre = hcat @ state.w_hop
        logits = np.maximum(pre, 0.0)
        hidden = hcat
        cache.mlp_pre = pre
        cache.hcat = hcat
    else:
        d0 = cache.dropped[0]
        u_cls = cfg.class_temp * (d0 @ state.bank_p)
        a_cls = _softmax_rows(u_cls)
        w_cls = a_cls @ state.bank_p.T
        mass = np.empty((n, cfg.k_max))
        b_list = []
        for k in range(1, cfg.k_max + 1):
            b_k = cache.dropped[k] * w_cls
            b_list.append(b_k)
            mass[:, k - 1] = cfg.hop_temp * b_k.sum(axis=1)
        a_hop = _softmax_rows(mass)
        hidden = np.zeros((n, h))
        for k in range(1, cfg.k_max + 1):
            hidden += a_hop[:, k - 1][:, None] * b_list[k - 1]
        logits = hidden @ state.bank_p
        cache.bank = {
            "a_cls": a_cls,
            "w_cls": w_cls,
            "a_hop": a_hop,
            "b_list": b_list,
        }
    if not (np.all(np.isfinite(logits)) and np.all(np.isfinite(hidden))):
        raise TrainingDivergenceError(epoch, what="activations")
    cache.hidden = hidden
    cache.logits = logits
    table = EmbeddingTable(hidden=hidden, logits=logits, unit_hidden=unit_rows(hidden))
    return table, cache


# ---------------------------------------------------------------------------
# loss


def nll_loss(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    """Mean negative log-softmax of the true class over masked nodes."""
    idx = np.flatnonzero(mask) if mask.dtype == bool else np.asarray(mask)
    if idx.size == 0:
        raise ValidationError("loss mask must be nonempty")
    z = logits[idx]
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    true = z[np.arange(idx.size), labels[idx]]
    return float(np.mean(lse - true))


def nll_loss_grad(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(mask) if mask.dtype == bool else np.asarray(mask)
    if idx.size == 0:
        raise ValidationError("loss mask must be nonempty")
    d = np.zeros_like(logits)
    soft = _softmax_rows(logits[idx])
    soft[np.arange(idx.size), labels[idx]] -= 1.0
    d[idx] = soft / idx.size
    return d


# ---------------------------------------------------------------------------
# backward


def grad(
    state: EncoderState,
    channels: ExactChannels | LatentChannels,
    cache: ForwardCache,
    labels: np.ndarray,
    mask: np.ndarray,
) -> dict[str, np.ndarray]:
    """Exact gradients of nll_loss(forward(...)) w.r.t. every parameter."""
    if cache.logits is None:
        raise UsageError("gradient requires a forward cache")
    cfg = state.config
    n = cache.logits.shape[0]
    is_latent = isinstance(channels, LatentChannels)
    grads = {name: np.zeros_like(arr) for name, arr in state.params().items()}

    dlogits = nll_loss_grad(cache.logits, labels, mask)
    d_dropped = [None] * (cfg.k_max + 1)

    if cfg.fusion == "mlp":
        dpre = dlogits * (cache.mlp_pre > 0)
        grads["w_hop"] += cache.hcat.T @ dpre
        dhcat = dpre @ state.w_hop.T
        h = cfg.hidden
        for k in range(cfg.k_max + 1):
            d_dropped[k] = dhcat[:, k * h : (k + 1) * h]
    else:
        bank = cache.bank
        a_cls, w_cls = bank["a_cls"], bank["w_cls"]
        a_hop, b_list = bank["a_hop"], bank["b_list"]
        dhidden = dlogits @ state.bank_p.T
        grads["bank_p"] += cache.hidden.T @ dlogits
        d_alpha_hop = np.empty((n, cfg.k_max))
        for k in range(1, cfg.k_max + 1):
            d_alpha_hop[:, k - 1] = (dhidden * b_list[k - 1]).sum(axis=1)
        d_mass = _softmax_rows_backward(d_alpha_hop, a_hop)
        dw_cls = np.zeros_like(w_cls)
        for k in range(1, cfg.k_max + 1):
            db_k = a_hop[:, k - 1][:, None] * dhidden
            db_k = db_k + cfg.hop_temp * d_mass[:, k - 1][:, None]
            d_dropped[k] = db_k * w_cls
            dw_cls += db_k * cache.dropped[k]
        da_cls = dw_cls @ state.bank_p
        grads["bank_p"] += dw_cls.T @ a_cls
        du_cls = _softmax_rows_backward(da_cls, a_cls)
        d_dropped[0] = cfg.class_temp * (du_cls @ state.bank_p.T)
        grads["bank_p"] += cfg.class_temp * (cache.dropped[0].T @ du_cls)

    d_fused = []
    for k in range(cfg.k_max + 1):
        dd = d_dropped[k]
        if cache.drop_masks[k] is not None:
            dd = dd * cache.drop_masks[k]
        d_fused.append(dd)

    dp_lp = np.zeros_like(cache.p_lp)
    dp_hp = np.zeros_like(cache.p_hp)
    dc_lp = np.zeros_like(cache.c_lp) if is_latent else None
    dc_hp = np.zeros_like(cache.c_hp) if is_latent else None

    # hop 0
    dp_lp += d_fused[0] * (cache.s_lp[0] > 0)

    use_attention = (not is_latent) and channels.weighting == "local_attention"
    for k in range(1, cfg.k_max + 1):
        h_lp, h_hp = cache.h_lp[k], cache.h_hp[k]
        gate = cache.gate_lp[k]
        dH = d_fused[k]
        d_gate_lp = (dH * h_lp).sum(axis=1)
        d_gate_hp = (dH * h_hp).sum(axis=1)
        dh_lp = gate[:, None] * dH
        dh_hp = (1.0 - gate)[:, None] * dH
        ds_gate = gate * (1.0 - gate) * (d_gate_lp - d_gate_hp)
        dh_lp += ds_gate[:, None] * state.a_lp[None, :]
        grads["a_lp"] += h_lp.T @ ds_gate
        dh_hp += (-ds_gate)[:, None] * state.a_hp[None, :]
        grads["a_hp"] += h_hp.T @ (-ds_gate)
        ds_lp = dh_lp * (cache.s_lp[k] > 0)
        ds_hp = dh_hp * (cache.s_hp[k] > 0)

        if is_latent:
            dc_lp += channels.ud[k - 1].T @ (channels.weights[k - 1][:, None] * ds_lp)
            dp_hp += ds_hp
            dc_hp -= channels.ud[k - 1].T @ ds_hp
        elif use_attention:
            att = cache.att[k - 1]
            t_lp, t_hp = att["t_lp"], att["t_hp"]
            dp_lp += matmul_dense(t_lp.transpose(), ds_lp)
            dp_hp += matmul_dense(t_hp.transpose(), ds_hp)
            # gradient into the reweighted operator values (sampled products)
            op = channels.operators[k]
            dt_lp = kernels.sddmm(op.shape, op.indptr, op.indices, ds_lp, cache.p_lp)
            dt_hp = kernels.sddmm(op.shape, op.indptr, op.indices, ds_hp, cache.p_hp)
            rows = att["rows"]
            # row-normalization backward: T = v / s
            lp_dot = kernels.row_sums(n, op.indptr, dt_lp * t_lp.values)
            hp_dot = kernels.row_sums(n, op.indptr, dt_hp * t_hp.values)
            dv_lp = (dt_lp - lp_dot[rows]) * att["lp_scale"][rows]
            dv_hp = (dt_hp - hp_dot[rows]) * att["hp_scale"][rows]
            alpha = att["alpha"]
            d_alpha = op.values * (dv_lp - dv_hp)
            dz = alpha * (1.0 - alpha) * d_alpha
            m_dz = op.with_values(dz)
            g = att["g"]
            dg = matmul_dense(m_dz, g) + matmul_dense(m_dz.transpose(), g)
            grads["w_renorm"] += dg.T @ channels.h_embed
        else:
            op_t = channels.operators[k].transpose()
            dp_lp += matmul_dense(op_t, ds_lp)
            dp_hp += ds_hp - matmul_dense(op_t, ds_hp)

    x = channels.x
    grads["w_lp"] += x.T @ dp_lp
    grads["w_hp"] += x.T @ dp_hp
    if is_latent:
        grads["w_lp"] += channels.plan.projected_features.T @ dc_lp
        grads["w_hp"] += channels.plan.projected_features.T @ dc_hp
    return grads


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    state: EncoderState
    table: EmbeddingTable
    train_losses: list[float]
    val_accs: list[float]
    best_epoch: int
    epochs_run: int


def masked_accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    idx = np.flatnonzero(mask) if mask.dtype == bool else np.asarray(mask)
    if idx.size == 0:
        return 0.0
    return float((logits[idx].argmax(axis=1) == labels[idx]).mean())


def train(
    ds: DataSet,
    config: EncoderConfig,
    channels: ExactChannels | LatentChannels | None = None,
) -> TrainResult:
    """Full-batch gradient descent with early stopping on validation accuracy.

    Returns the parameters and eval-mode embeddings of the best-validation
    epoch. Deterministic for a fixed (dataset, config) pair.
    """
    config.check()
    if channels is None:
        channels = prepare_channels(ds, config)
    state = EncoderState(config, d=ds.features.shape[1], c=ds.n_classes)
    labels = ds.labels
    train_mask = ds.split == TRAIN
    val_mask = ds.split == VAL
    has_val = bool(val_mask.any())

    channels.refresh_anchor(state)
    table, _ = forward(state, channels, train_mode=False)
    if has_val:
        best_score = masked_accuracy(table.logits, labels, val_mask)
    else:
        # no validation nodes: select on training loss instead
        best_score = -nll_loss(table.logits, labels, train_mask)
    best_params = state.copy_params()
    best_epoch = -1
    stale = 0
    train_losses: list[float] = []
    val_accs: list[float] = []

    for epoch in range(config.epochs):
        channels.refresh_anchor(state)
        rng = np.random.default_rng((config.seed, epoch))
        _, cache = forward(state, channels, train_mode=True, rng=rng, epoch=epoch)
        loss = nll_loss(cache.logits, labels, train_mask)
        if not np.isfinite(loss):
            raise TrainingDivergenceError(epoch)
        train_losses.append(loss)
        grads = grad(state, channels, cache, labels, train_mask)
        for name, arr in state.params().items():
            arr -= config.lr * grads[name]
        state.check_finite(epoch)

        table, _ = forward(state, channels, train_mode=False, epoch=epoch)
        if has_val:
            val_acc = masked_accuracy(table.logits, labels, val_mask)
            score = val_acc
        else:
            val_acc = -1.0
            score = -nll_loss(table.logits, labels, train_mask)
        val_accs.append(val_acc)
        if score > best_score:
            best_score = score
            best_params = state.copy_params()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    state.set_params(best_params)
    channels.refresh_anchor(state)
    table, _ = forward(state, channels, train_mode=False)
    return TrainResult(
        state=state,
        table=table,
        train_losses=train_losses,
        val_accs=val_accs,
        best_epoch=best_epoch,
        epochs_run=len(train_losses),
    )


def bank_attention(
    h0: np.ndarray,
    hop_feats: list[np.ndarray],
    bank_p: np.ndarray,
    class_temp: float = 1.0,
    hop_temp: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Standalone class-bank hop fusion over given channel activations.

    Mirrors the bank branch of forward() on fixed inputs; returns
    (hidden, class_attention, hop_attention). Used as a diagnostic surface
    for the hop-selection analysis: with separated hops and large
    temperatures the hop attention concentrates on the label-consistent hop.
    """
    u_cls = class_temp * (h0 @ bank_p)
    a_cls = _softmax_rows(u_cls)
    w_cls = a_cls @ bank_p.T
    mass = np.stack(
        [hop_temp * (hk * w_cls).sum(axis=1) for hk in hop_feats], axis=1
    )
    a_hop = _softmax_rows(mass)
    hidden = np.zeros_like(h0)
    for i, hk in enumerate(hop_feats):
        hidden += a_hop[:, i][:, None] * (hk * w_cls)
    return hidden, a_cls, a_hop


# ---------------------------------------------------------------------------
# embedding quality metric


def hnd_metric(embeddings: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of nodes whose mean intra-class cosine is at least their
    mean inter-class cosine; nodes lacking either comparison side are
    excluded from the denominator."""
    classes = np.unique(labels)
    if classes.size < 2:
        raise UndefinedMetricError("HND needs at least two classes")
    u = unit_rows(np.asarray(embeddings, dtype=np.float64))
    sims = u @ u.T
    n = u.shape[0]
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(same, False)
    diff = labels[:, None] != labels[None, :]
    intra_cnt = same.sum(axis=1)
    inter_cnt = diff.sum(axis=1)
    keep = (intra_cnt > 0) & (inter_cnt > 0)
    if not keep.any():
        raise UndefinedMetricError("no node has both comparison sides")
    intra_mean = np.where(intra_cnt > 0, (sims * same).sum(axis=1) / np.maximum(intra_cnt, 1), 0)
    inter_mean = np.where(inter_cnt > 0, (sims * diff).sum(axis=1) / np.maximum(inter_cnt, 1), 0)
    good = (intra_mean >= inter_mean) & keep
    return float(good.sum() / keep.sum())


# ---------------------------------------------------------------------------
# checkpoints


CHECKPOINT_VERSION = 1


def dataset_hash(ds: DataSet) -> str:
    import hashlib

    digest = hashlib.sha256()
    digest.update(matrix_hash(ds.graph.adj).encode())
    digest.update(np.ascontiguousarray(ds.features).astype("<f8").tobytes())
    digest.update(np.ascontiguousarray(ds.labels).astype("<i8").tobytes())
    return digest.hexdigest()


def save_checkpoint(path: str, result: TrainResult, ds_hash: str):
    state = result.state
    arrays = {k: v.astype("<f8") for k, v in state.params().items()}
    config_json = json.dumps(dataclasses.asdict(state.config))
    np.savez(
        path,
        version=np.array([CHECKPOINT_VERSION]),
        config_json=np.frombuffer(config_json.encode(), dtype=np.uint8),
        d=np.array([state.d]),
        c=np.array([state.c]),
        unit_hidden=result.table.unit_hidden.astype("<f8"),
        hidden=result.table.hidden.astype("<f8"),
        logits=result.table.logits.astype("<f8"),
        **arrays,
    )
    sidecar = {
        "epochs_run": result.epochs_run,
        "best_epoch": result.best_epoch,
        "final_train_loss": result.train_losses[-1] if result.train_losses else None,
        "val_accuracy": result.val_accs[result.best_epoch] if result.best_epoch >= 0 else None,
        "dataset_hash": ds_hash,
    }
    side_path = str(path)
    if side_path.endswith(".npz"):
        side_path = side_path[: -len(".npz")]
    with open(side_path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)


def load_checkpoint(path: str) -> tuple[EncoderState, EmbeddingTable, dict]:
    with np.load(path) as data:
        version = int(data["version"][0])
        if version != CHECKPOINT_VERSION:
            raise UsageError(f"unsupported checkpoint version {version}")
        config = EncoderConfig(**json.loads(bytes(data["config_json"]).decode()))
        state = EncoderState(config, d=int(data["d"][0]), c=int(data["c"][0]))
        state.set_params({k: data[k] for k in state.params()})
        table = EmbeddingTable(
            hidden=data["hidden"].astype(np.float64),
            logits=data["logits"].astype(np.float64),
            unit_hidden=data["unit_hidden"].astype(np.float64),
        )
    side_path = str(path)
    if side_path.endswith(".npz"):
        side_path = side_path[: -len(".npz")]
    try:
        with open(side_path + ".json", "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except FileNotFoundError:
        sidecar = {}
    return state, table, sidecar
