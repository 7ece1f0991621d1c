"""Experiment harness: F1 evaluation over sampled queries, baseline
comparison, latency measurement, and the theory-check suite.

Evaluation protocol: the ground-truth community of a query is the set of
all nodes sharing its label. Communities are size-matched to the truth by
default: ranking baselines receive the truth size as their total budget,
and the embedding searchers request truth-size minus one additional
members beyond the query, so every method predicts exactly as many nodes
as the truth contains. Fixed budgets are available through the config.

Timing split: training plus positive-graph construction count as offline
cost; per-query search wall time is measured around the search call only.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import k_core_community, k_truss_community, label_propagation_community
from .encoder import EncoderConfig, TrainResult, hnd_metric, train
from .errors import UsageError, ValidationError
from .graph import TEST, DataSet, Graph, edge_homophily, load_dataset
from .search import (
    CommunityResult,
    SearchConfig,
    acs,
    build_positive_graph,
    estimate_homophily,
    scs,
)
from .sparse import matmul_dense, sym_normalize

ALL_METHODS = ("adaptcs-acs", "adaptcs-scs", "k-core", "k-truss", "lp")


def f1(predicted: set[int], truth: set[int]) -> float:
    """Balanced precision/recall overlap of two node sets."""
    if not predicted:
        raise ValidationError("predicted set must be nonempty")
    if not truth:
        raise ValidationError("truth set must be nonempty")
    hit = len(predicted & truth)
    if hit == 0:
        return 0.0
    precision = hit / len(predicted)
    recall = hit / len(truth)
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one dataset evaluation."""

    name: str = "dataset"
    graph_path: str | None = None
    features_path: str | None = None
    labels_path: str | None = None
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    n_queries: int = 50
    methods: tuple[str, ...] = ALL_METHODS
    matched_k: bool = True  # community budget = per-query truth size
    checkpoint: str | None = None

    def check(self):
        if self.n_queries < 1:
            raise ValidationError("n_queries must be positive")
        for m in self.methods:
            if m not in ALL_METHODS:
                raise ValidationError(f"unknown method {m!r}")
        self.encoder.check()
        self.search.check()


@dataclass
class MethodResult:
    name: str
    f1_values: list[float] = field(default_factory=list)
    latencies: list[float] = field(default_factory=list)

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1_values))

    @property
    def std_f1(self) -> float:
        return float(np.std(self.f1_values))

    def latency_percentiles(self) -> dict[str, float]:
        lat = np.asarray(self.latencies)
        return {
            "p50": float(np.percentile(lat, 50)),
            "p95": float(np.percentile(lat, 95)),
            "max": float(lat.max()),
        }

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "mean_f1": self.mean_f1,
            "std_f1": self.std_f1,
            "per_query_f1": [float(v) for v in self.f1_values],
        }
        if timing:
            out["latency_s"] = self.latency_percentiles()
        return out


@dataclass
class Report:
    dataset: str
    n: int
    m: int
    homophily: float
    queries: list[int]
    methods: dict[str, MethodResult]
    config: dict
    violations: list[str] = field(default_factory=list)
    train_seconds: float = 0.0
    offline_seconds: float = 0.0
    epochs_run: int = 0

    def check(self):
        for name, res in self.methods.items():
            if len(res.f1_values) != len(self.queries):
                raise ValidationError(f"{name}: per-query table size mismatch")
            for v in res.f1_values:
                if not 0.0 <= v <= 1.0:
                    raise ValidationError(f"{name}: F1 outside [0,1]")
            if abs(res.mean_f1 - float(np.mean(res.f1_values))) > 1e-12:
                raise ValidationError(f"{name}: mean f1 inconsistent")
            lat = res.latency_percentiles()
            if not lat["p50"] <= lat["p95"] <= lat["max"]:
                raise ValidationError(f"{name}: latency percentiles not monotone")

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "dataset": self.dataset,
            "n": self.n,
            "m": self.m,
            "homophily": self.homophily,
            "queries": [int(q) for q in self.queries],
            "methods": {k: v.to_dict(timing) for k, v in sorted(self.methods.items())},
            "config": self.config,
            "violations": list(self.violations),
        }
        if timing:
            out["train_seconds"] = self.train_seconds
            out["offline_seconds"] = self.offline_seconds
            out["epochs_run"] = self.epochs_run
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    def per_query_csv(self) -> str:
        names = sorted(self.methods)
        lines = ["query," + ",".join(names)]
        for i, q in enumerate(self.queries):
            row = [str(q)] + [f"{self.methods[n].f1_values[i]:.6f}" for n in names]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def sample_queries(ds: DataSet, n_queries: int, seed: int) -> np.ndarray:
    """Seeded test-split query sample; repeats only when the split is small."""
    pool = ds.nodes_in(TEST)
    if pool.size == 0:
        raise ValidationError("test split is empty")
    rng = np.random.default_rng(seed)
    replace_draws = pool.size < n_queries
    return rng.choice(pool, size=n_queries, replace=replace_draws)


def _truth_sets(ds: DataSet) -> dict[int, set[int]]:
    return {c: set(np.flatnonzero(ds.labels == c).tolist()) for c in range(ds.n_classes)}


def run_experiment(
    config: ExperimentConfig,
    ds: DataSet | None = None,
    train_result: TrainResult | None = None,
) -> Report:
    """Train (or reuse) an encoder, run every configured method over the
    seeded query sample, and aggregate F1 plus latency."""
    config.check()
    if ds is None:
        if not (config.graph_path and config.features_path and config.labels_path):
            raise UsageError("run_experiment needs a dataset or dataset paths")
        ds = load_dataset(
            config.graph_path,
            config.features_path,
            config.labels_path,
            seed=config.seed,
            name=config.name,
        )
    ds.check()

    needs_encoder = any(m.startswith("adaptcs") for m in config.methods)
    emb = None
    train_seconds = 0.0
    offline_seconds = 0.0
    epochs_run = 0
    positive = None
    h_est = 0.5
    if needs_encoder:
        if train_result is None:
            if config.checkpoint:
                from .encoder import load_checkpoint

                _, table, _ = load_checkpoint(config.checkpoint)
                emb = table.unit_hidden
            else:
                t0 = time.perf_counter()
                train_result = train(ds, config.encoder)
                train_seconds = time.perf_counter() - t0
                emb = train_result.table.unit_hidden
                epochs_run = train_result.epochs_run
        else:
            emb = train_result.table.unit_hidden
            epochs_run = train_result.epochs_run
        t0 = time.perf_counter()
        if "adaptcs-scs" in config.methods:
            positive = build_positive_graph(
                ds.graph, emb, config.search.tau_sign, config.search.tau_quantile
            )
        h_est = estimate_homophily(ds.graph, ds.labels, ds.split)
        offline_seconds = train_seconds + (time.perf_counter() - t0)

    queries = sample_queries(ds, config.n_queries, config.seed)
    truths = _truth_sets(ds)
    results = {m: MethodResult(name=m) for m in config.methods}

    for q in queries:
        q = int(q)
        truth = truths[int(ds.labels[q])]
        t_size = len(truth)
        for m in config.methods:
            if config.matched_k:
                budget_total = t_size
                budget_extra = t_size - 1
            else:
                budget_total = config.search.k_size
                budget_extra = config.search.k_size
            t0 = time.perf_counter()
            if m == "adaptcs-acs":
                cfg_q = replace(config.search, k_size=max(budget_extra, 0))
                res = acs(ds.graph, emb, q, cfg_q, h_est)
            elif m == "adaptcs-scs":
                cfg_q = replace(config.search, k_size=max(budget_extra, 0))
                res = scs(positive, emb, q, cfg_q)
            elif m == "k-core":
                res = k_core_community(ds.graph, q, max(budget_total, 1))
            elif m == "k-truss":
                res = k_truss_community(ds.graph, q, max(budget_total, 1))
            else:
                res = label_propagation_community(ds, q, max(budget_total, 1))
            elapsed = time.perf_counter() - t0
            results[m].f1_values.append(f1(set(res.members.tolist()), truth))
            results[m].latencies.append(elapsed)

    violations = []
    audit = _dataset_audit(ds)
    if audit is not None:
        if audit["n_violations"] > 0:
            violations.append(
                f"triangle-support bound violated on {audit['n_violations']} edges"
            )
        if audit["n_edges"] and not audit["mean_shift_ok"]:
            violations.append("retained-edge support mean does not exceed excluded mean")

    report = Report(
        dataset=ds.name,
        n=ds.n,
        m=ds.graph.m,
        homophily=edge_homophily(ds.graph, ds.labels),
        queries=[int(q) for q in queries],
        methods=results,
        config=_config_echo(config),
        violations=violations,
        train_seconds=train_seconds,
        offline_seconds=offline_seconds,
        epochs_run=epochs_run,
    )
    report.check()
    return report


def _config_echo(config: ExperimentConfig) -> dict:
    echo = dataclasses.asdict(config)
    echo["methods"] = list(config.methods)
    return echo


def _dataset_audit(ds: DataSet) -> dict | None:
    """Triangle-support bound audit of the adaptive hop-2 channel."""
    from .hops import triangle_support_audit

    if ds.graph.m == 0:
        return None
    a_hat = sym_normalize(ds.graph.adj)
    audit = triangle_support_audit(ds.graph, a_hat)
    out = audit.to_dict()
    shift_ok = True
    if audit.retained_supports.size and audit.excluded_supports.size:
        shift_ok = audit.mean_retained > audit.mean_excluded
    out["mean_shift_ok"] = bool(shift_ok)
    return out


# ---------------------------------------------------------------------------
# flip-effect demo and theory suite


def highpass_similarity(ds: DataSet) -> np.ndarray:
    """Dense L X (L X)^T with L = I - sym-normalized adjacency."""
    a_hat = sym_normalize(ds.graph.adj)
    lx = ds.features - matmul_dense(a_hat, ds.features)
    return lx @ lx.T


def flip_effect_demo(out_dir: str | None = None, seed: int = 0) -> dict:
    """Reproduce the high-pass similarity flip at toy scale.

    Binary alternating cycle: inter-class high-pass similarity must be
    nonpositive everywhere. Four-class cycle: at least one cross-class pair
    acquires strictly positive similarity (the flip). Training the encoder
    on the four-class toy must then restore perfect distinguishability
    (HND = 1.0) because same-class nodes live on a dedicated exact hop.
    """
    from .synth import flip_toy_binary, flip_toy_four

    binary = flip_toy_binary(8)
    four = flip_toy_four(16)

    s_bin = highpass_similarity(binary)
    s_four = highpass_similarity(four)

    diff_bin = binary.labels[:, None] != binary.labels[None, :]
    binary_violations = int((s_bin[diff_bin] > 1e-12).sum())

    diff_four = four.labels[:, None] != four.labels[None, :]
    flip_entries = int((s_four[diff_four] > 1e-9).sum())

    enc_cfg = EncoderConfig(
        k_max=5,
        hidden=64,
        mask_mode="adaptive",
        weighting="raw",
        fusion="bank",
        dropout=0.0,
        lr=0.1,
        epochs=300,
        patience=300,
        seed=seed,
        hop_temp=4.0,
    )
    result = train(four, enc_cfg)
    hnd = hnd_metric(result.table.unit_hidden, four.labels)

    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        np.savetxt(os.path.join(out_dir, "flip_binary_similarity.csv"), s_bin,
                   delimiter=",", fmt="%.8f")
        np.savetxt(os.path.join(out_dir, "flip_four_similarity.csv"), s_four,
                   delimiter=",", fmt="%.8f")

    violations = []
    if binary_violations > 0:
        violations.append(
            f"binary toy has {binary_violations} positive inter-class entries"
        )
    if flip_entries == 0:
        violations.append("four-class toy shows no flipped positive entry")
    if hnd < 1.0:
        violations.append(f"four-class toy HND {hnd:.4f} below 1.0 after training")
    return {
        "binary_inter_class_positive": binary_violations,
        "four_class_flip_entries": flip_entries,
        "hnd_after_training": hnd,
        "violations": violations,
        "ok": not violations,
    }


def theory_suite(datasets: list[DataSet], out_dir: str | None = None) -> dict:
    """Triangle-support audit over real datasets plus the flip demo."""
    sections = {}
    violations: list[str] = []
    for ds in datasets:
        audit = _dataset_audit(ds)
        if audit is None:
            continue
        sections[ds.name] = audit
        if audit["n_violations"] > 0:
            violations.append(
                f"{ds.name}: triangle bound violated on {audit['n_violations']} edges"
            )
        if not audit["mean_shift_ok"]:
            violations.append(f"{ds.name}: no right-shift in retained support means")
    flip = flip_effect_demo(out_dir=out_dir)
    sections["flip_demo"] = flip
    violations.extend(flip["violations"])
    return {"sections": sections, "violations": violations, "ok": not violations}
