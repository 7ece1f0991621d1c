"""CLI: config loading, overrides, subcommand wiring, exit codes."""

import json

import pytest

from adaptcs.cli import _apply_overrides, _parse_value, main
from adaptcs.errors import UsageError
from adaptcs.synth import planted_two_class


def write_dataset(tmp_path, ds):
    edges = "\n".join(f"{u}\t{v}" for u, v in ds.graph.edge_pairs()) + "\n"
    feats = "\n".join(
        ",".join(f"{x:.6f}" for x in row) for row in ds.features
    ) + "\n"
    labels = "node,label\n" + "\n".join(
        f"{i},{int(l)}" for i, l in enumerate(ds.labels)
    ) + "\n"
    paths = {}
    for name, text in (("edges.tsv", edges), ("features.csv", feats),
                       ("labels.csv", labels)):
        p = tmp_path / name
        p.write_text(text)
        paths[name] = str(p)
    return paths


@pytest.fixture()
def config_path(tmp_path):
    ds = planted_two_class(n=24, p_in=0.5, p_out=0.15, seed=4)
    paths = write_dataset(tmp_path, ds)
    config = {
        "name": "planted2",
        "graph_path": paths["edges.tsv"],
        "features_path": paths["features.csv"],
        "labels_path": paths["labels.csv"],
        "seed": 4,
        "n_queries": 4,
        "encoder": {
            "k_max": 2,
            "hidden": 16,
            "mask_mode": "adaptive",
            "weighting": "raw",
            "fusion": "mlp",
            "dropout": 0.0,
            "lr": 0.5,
            "epochs": 10,
            "patience": 10,
            "seed": 0,
        },
        "search": {"k_size": 5},
    }
    p = tmp_path / "config.json"
    p.write_text(json.dumps(config))
    return str(p)


# ---------------------------------------------------------------------------
# override plumbing


def test_parse_value_json_else_string():
    assert _parse_value("5") == 5
    assert _parse_value("0.25") == 0.25
    assert _parse_value("true") is True
    assert _parse_value("null") is None
    assert _parse_value("raw_text") == "raw_text"


def test_apply_overrides_dotted_paths():
    cfg = _apply_overrides({}, ["encoder.k_max=3", "name=cora", "seed=7"])
    assert cfg == {"encoder": {"k_max": 3}, "name": "cora", "seed": 7}


def test_apply_overrides_rejects_malformed():
    with pytest.raises(UsageError):
        _apply_overrides({}, ["no_equals_sign"])


# ---------------------------------------------------------------------------
# subcommands


def test_ingest_summary(config_path, capsys):
    assert main(["ingest", "--config", config_path]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["nodes"] == 24
    assert out["classes"] == 2
    assert out["split"]["train"] + out["split"]["val"] + out["split"]["test"] == 24
    assert 0.0 <= out["homophily"] <= 1.0
    assert len(out["hash"]) > 0


def test_ingest_respects_set_override(config_path, capsys):
    assert main(["ingest", "--config", config_path, "--set", "name=renamed"]) == 0
    assert json.loads(capsys.readouterr().out)["name"] == "renamed"


def test_ingest_unknown_key_exits_2(config_path, capsys):
    assert main(["ingest", "--config", config_path, "--set", "bogus_key=1"]) == 2
    assert "error:" in capsys.readouterr().err


def test_ingest_missing_paths_exits_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("{}")
    assert main(["ingest", "--config", str(p)]) == 2
    assert "error:" in capsys.readouterr().err


def test_config_must_be_object(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text("[1, 2]")
    assert main(["ingest", "--config", str(p)]) == 2


def test_missing_config_file_exits_2(capsys):
    assert main(["ingest", "--config", "/nonexistent/cfg.json"]) == 2


def test_train_search_roundtrip(config_path, tmp_path, capsys):
    ckpt = str(tmp_path / "model.npz")
    assert main(["train", "--config", config_path, "--out", ckpt]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["checkpoint"] == ckpt
    assert summary["epochs_run"] >= 1
    assert summary["train_seconds"] > 0.0

    code = main([
        "search", "--config", config_path, "--checkpoint", ckpt,
        "--query", "0", "--query", "3", "--k", "4",
    ])
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 2
    for line, want_q in zip(lines, (0, 3)):
        rec = json.loads(line)
        assert rec["query"] == want_q
        assert rec["members"][0] == want_q
        assert len(rec["members"]) <= 5
        assert len(rec["members"]) == len(rec["scores"])
        assert rec["algorithm"].endswith("acs")

    code = main([
        "search", "--config", config_path, "--checkpoint", ckpt,
        "--query", "1", "--algorithm", "scs",
    ])
    assert code == 0
    rec = json.loads(capsys.readouterr().out.strip())
    assert rec["algorithm"].endswith("scs")
    assert rec["teleports"] >= 0


def test_search_query_out_of_range_exits_2(config_path, tmp_path, capsys):
    ckpt = str(tmp_path / "model.npz")
    main(["train", "--config", config_path, "--out", ckpt])
    capsys.readouterr()
    assert main([
        "search", "--config", config_path, "--checkpoint", ckpt, "--query", "99",
    ]) == 2


def test_eval_report_and_exit_semantics(config_path, tmp_path, capsys):
    out_path = str(tmp_path / "report.json")
    csv_path = str(tmp_path / "per_query.csv")
    code = main([
        "eval", "--config", config_path, "--out", out_path,
        "--csv", csv_path, "--no-timing",
    ])
    report = json.loads((tmp_path / "report.json").read_text())
    assert code == (0 if not report["violations"] else 1)
    assert sorted(report["methods"]) == [
        "adaptcs-acs", "adaptcs-scs", "k-core", "k-truss", "lp",
    ]
    for res in report["methods"].values():
        assert len(res["per_query_f1"]) == 4
        assert "latency_s" not in res  # --no-timing
    csv_lines = (tmp_path / "per_query.csv").read_text().strip().split("\n")
    assert len(csv_lines) == 5
    assert csv_lines[0].startswith("query,")
    capsys.readouterr()


def test_bench_kernel_section_only(capsys):
    assert main(["bench", "--skip-ladder"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert "ladder" not in out
    assert "numpy" in out["kernels"]
    for timing in out["kernels"]["numpy"].values():
        assert timing > 0.0


def test_bench_skip_everything(capsys):
    assert main(["bench", "--skip-ladder", "--skip-kernels"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["backend"] in ("numba", "numpy")
