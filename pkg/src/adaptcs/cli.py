"""Command-line interface.

Subcommands:
  ingest  validate a dataset triple and print its summary
  train   fit the encoder and write a checkpoint
  search  run community queries against a checkpoint (JSON lines out)
  eval    full experiment: train + all methods + F1/latency report
  theory  triangle-support audit + flip-effect demo + HND check
  bench   size-ladder query latency and kernel backend comparison

Configuration comes from one JSON file (--config) plus repeatable
--set dotted.key=value overrides; values parse as JSON when possible.
The process exits 0 only when the run reports zero theory-check
violations (eval and theory); other subcommands exit 0 on success and
2 on usage or data errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .backend import active_backend, set_backend
from .encoder import EncoderConfig, load_checkpoint, save_checkpoint, dataset_hash, train
from .errors import AdaptcsError, UsageError
from .experiment import (
    ALL_METHODS,
    ExperimentConfig,
    run_experiment,
    theory_suite,
)
from .graph import DataSet, edge_homophily, load_dataset
from .search import SearchConfig, acs, build_positive_graph, estimate_homophily, scs
from .synth import random_unit_embeddings, size_ladder


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(config: dict, sets: list[str]) -> dict:
    for item in sets:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _parse_value(value)
    return config


def _load_config(path: str | None, sets: list[str]) -> dict:
    config: dict = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
    return _apply_overrides(config, sets or [])


def _experiment_config(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    enc = EncoderConfig(**raw.pop("encoder", {}))
    search_raw = raw.pop("search", {})
    search = SearchConfig(**search_raw)
    methods = tuple(raw.pop("methods", ALL_METHODS))
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(encoder=enc, search=search, methods=methods, **raw)


def _dataset_from_config(cfg: ExperimentConfig) -> DataSet:
    if not (cfg.graph_path and cfg.features_path and cfg.labels_path):
        raise UsageError("config must set graph_path, features_path, labels_path")
    return load_dataset(
        cfg.graph_path, cfg.features_path, cfg.labels_path, seed=cfg.seed, name=cfg.name
    )


def _emit(obj, out_path: str | None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    cfg = _experiment_config(_load_config(args.config, args.set))
    ds = _dataset_from_config(cfg)
    ds.check()
    split_sizes = [int((ds.split == part).sum()) for part in (0, 1, 2)]
    summary = {
        "name": ds.name,
        "nodes": ds.n,
        "edges": ds.graph.m,
        "features": int(ds.features.shape[1]),
        "classes": ds.n_classes,
        "homophily": edge_homophily(ds.graph, ds.labels),
        "split": {"train": split_sizes[0], "val": split_sizes[1], "test": split_sizes[2]},
        "hash": dataset_hash(ds),
    }
    _emit(summary, args.out)
    return 0


def cmd_train(args) -> int:
    cfg = _experiment_config(_load_config(args.config, args.set))
    ds = _dataset_from_config(cfg)
    t0 = time.perf_counter()
    result = train(ds, cfg.encoder)
    wall = time.perf_counter() - t0
    save_checkpoint(args.out, result, dataset_hash(ds))
    summary = {
        "checkpoint": args.out,
        "epochs_run": result.epochs_run,
        "best_epoch": result.best_epoch,
        "final_train_loss": result.train_losses[-1] if result.train_losses else None,
        "best_val_accuracy": (
            result.val_accs[result.best_epoch] if result.best_epoch >= 0 else None
        ),
        "train_seconds": wall,
    }
    _emit(summary, None)
    return 0


def cmd_search(args) -> int:
    cfg = _experiment_config(_load_config(args.config, args.set))
    ds = _dataset_from_config(cfg)
    _, table, _ = load_checkpoint(args.checkpoint)
    emb = table.unit_hidden
    if emb.shape[0] != ds.n:
        raise UsageError("checkpoint embeddings do not match the dataset size")
    search_cfg = cfg.search
    if args.k is not None:
        from dataclasses import replace

        search_cfg = replace(search_cfg, k_size=args.k)
    h_est = estimate_homophily(ds.graph, ds.labels, ds.split)
    positive = None
    if args.algorithm == "scs":
        positive = build_positive_graph(
            ds.graph, emb, search_cfg.tau_sign, search_cfg.tau_quantile
        )
    for q in args.query:
        if not 0 <= q < ds.n:
            raise UsageError(f"query id {q} outside [0, {ds.n})")
        if args.algorithm == "scs":
            res = scs(positive, emb, q, search_cfg)
        else:
            res = acs(ds.graph, emb, q, search_cfg, h_est)
        line = {
            "query": int(res.query),
            "members": [int(v) for v in res.members],
            "scores": [float(s) for s in res.scores],
            "algorithm": res.algorithm,
            "elapsed_s": res.elapsed_s,
            "teleports": res.teleports,
        }
        print(json.dumps(line, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    cfg = _experiment_config(_load_config(args.config, args.set))
    report = run_experiment(cfg)
    _emit(report.to_dict(timing=not args.no_timing), args.out)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(report.per_query_csv())
    return 0 if not report.violations else 1


def cmd_theory(args) -> int:
    datasets = []
    for spec_str in args.dataset or []:
        name = spec_str
        root = f"{args.data_root}/{name}"
        datasets.append(
            load_dataset(
                f"{root}/edges.tsv",
                f"{root}/features.csv",
                f"{root}/labels.csv",
                seed=args.seed,
                name=name,
            )
        )
    result = theory_suite(datasets, out_dir=args.out_dir)
    _emit(result, args.out)
    return 0 if result["ok"] else 1


def cmd_bench(args) -> int:
    out: dict = {"backend": active_backend()}
    if not args.skip_ladder:
        out["ladder"] = _bench_ladder(args.queries, args.k)
    if not args.skip_kernels:
        out["kernels"] = _bench_kernels()
    _emit(out, args.out)
    return 0


def _bench_ladder(n_queries: int, k_size: int) -> dict:
    rows = []
    cfg = SearchConfig(k_size=k_size, tau_sign=-1.0)
    for g in size_ladder(seed=0):
        emb = random_unit_embeddings(g.n, 64, seed=1)
        positive = build_positive_graph(g, emb, tau_sign=-1.0)
        rng = np.random.default_rng(2)
        queries = rng.integers(0, g.n, size=n_queries)
        scs_times, acs_times = [], []
        for q in queries:
            t0 = time.perf_counter()
            scs(positive, emb, int(q), cfg)
            scs_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            acs(g, emb, int(q), cfg, h_est=0.6)
            acs_times.append(time.perf_counter() - t0)
        rows.append(
            {
                "n": g.n,
                "m": g.m,
                "scs_mean_s": float(np.mean(scs_times)),
                "scs_max_s": float(np.max(scs_times)),
                "acs_mean_s": float(np.mean(acs_times)),
                "acs_max_s": float(np.max(acs_times)),
            }
        )
    slope = scaling_slope(
        [r["n"] + r["m"] for r in rows], [r["scs_mean_s"] for r in rows]
    )
    return {"rows": rows, "scs_loglog_slope": slope}


def scaling_slope(sizes: list[float], times: list[float]) -> float:
    """Least-squares slope of log(time) against log(size)."""
    x = np.log(np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def _bench_kernels() -> dict:
    from . import kernels
    from .synth import er_graph
    from .sparse import spgemm, matmul_dense as dense_mul, sym_normalize

    g = er_graph(2000, 0.01, seed=3)
    a = sym_normalize(g.adj)
    x = np.random.default_rng(4).normal(size=(g.n, 64))
    results = {}
    for backend in ("numba", "numpy"):
        try:
            set_backend(backend)
        except AdaptcsError:
            continue
        # warm the JIT outside the timed region
        spgemm(a, a)
        dense_mul(a, x)
        kernels.sddmm(a.shape, a.indptr, a.indices, x, x)
        timings = {}
        for name, fn in (
            ("spgemm", lambda: spgemm(a, a)),
            ("spmm", lambda: dense_mul(a, x)),
            ("sddmm", lambda: kernels.sddmm(a.shape, a.indptr, a.indices, x, x)),
        ):
            t0 = time.perf_counter()
            for _ in range(5):
                fn()
            timings[name] = (time.perf_counter() - t0) / 5
        results[backend] = timings
    set_backend("auto")
    return results


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptcs",
        description="Community search on heterophilic graphs: encode, search, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (dotted path, JSON value)",
        )
        if with_out:
            p.add_argument("--out", help="also write the JSON result to this path")

    p = sub.add_parser("ingest", help="validate a dataset and print its summary")
    common(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("train", help="train the encoder and save a checkpoint")
    common(p, with_out=False)
    p.add_argument("--out", required=True, help="checkpoint output path (.npz)")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("search", help="run community queries (JSON lines)")
    common(p, with_out=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--query", type=int, action="append", required=True)
    p.add_argument("--algorithm", choices=["acs", "scs"], default="acs")
    p.add_argument("--k", type=int, help="community size override")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("eval", help="full experiment report")
    common(p)
    p.add_argument("--csv", help="write the per-query F1 table to this path")
    p.add_argument("--no-timing", action="store_true", help="omit timing fields")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("theory", help="run the theory-check suite")
    p.add_argument("--dataset", action="append", help="dataset name under --data-root")
    p.add_argument("--data-root", default="data")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", help="directory for similarity CSV dumps")
    p.add_argument("--out", help="also write the JSON result to this path")
    p.set_defaults(fn=cmd_theory)

    p = sub.add_parser("bench", help="scaling ladder and kernel comparison")
    p.add_argument("--queries", type=int, default=10)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--skip-ladder", action="store_true")
    p.add_argument("--skip-kernels", action="store_true")
    p.add_argument("--out", help="also write the JSON result to this path")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except AdaptcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
