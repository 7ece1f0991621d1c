#!/usr/bin/env python3
"""Fetch and convert the evaluation datasets.

Produces, per dataset, the triple the loaders expect:

    data/<name>/edges.tsv      whitespace edge list, one undirected edge per line
    data/<name>/features.csv   n x d comma-separated feature matrix
    data/<name>/labels.csv     "node,label" rows with a header line

Sources (web page classification trio + citation network):
  cornell / texas / wisconsin  graph-domain benchmark mirrors on GitHub
  cora                         citation network with bag-of-words features

Usage:
  python scripts/fetch_datasets.py                  # download + convert all
  python scripts/fetch_datasets.py --from-dir DIR   # convert pre-downloaded raw files
  python scripts/fetch_datasets.py --only cornell texas

Set ADAPTCS_DATA_BASE_WEBKB / ADAPTCS_DATA_BASE_CORA to alternate base URLs
if the defaults are unreachable from your network.
"""

from __future__ import annotations

import argparse
import os
import sys
import urllib.request

WEBKB_BASE = os.environ.get(
    "ADAPTCS_DATA_BASE_WEBKB",
    "https://github.com/graphdml-uiuc-jlu/geom-gcn/raw/master/new_data",
)
CORA_BASE = os.environ.get(
    "ADAPTCS_DATA_BASE_CORA",
    "https://github.com/tkipf/pygcn/raw/master/data/cora",
)

WEBKB = ("cornell", "texas", "wisconsin")


def _download(url: str, dest: str):
    print(f"  fetching {url}")
    os.makedirs(os.path.dirname(dest), exist_ok=True)
    with urllib.request.urlopen(url) as resp, open(dest, "wb") as fh:
        fh.write(resp.read())


def fetch_raw(raw_dir: str, names: list[str]):
    for name in names:
        if name in WEBKB:
            _download(f"{WEBKB_BASE}/{name}/out1_graph_edges.txt",
                      os.path.join(raw_dir, f"{name}_edges.txt"))
            _download(f"{WEBKB_BASE}/{name}/out1_node_feature_label.txt",
                      os.path.join(raw_dir, f"{name}_nfl.txt"))
        elif name == "cora":
            _download(f"{CORA_BASE}/cora.content", os.path.join(raw_dir, "cora.content"))
            _download(f"{CORA_BASE}/cora.cites", os.path.join(raw_dir, "cora.cites"))
        else:
            raise SystemExit(f"unknown dataset {name!r}")


def _write_triple(out_dir: str, edges: list[tuple[int, int]], features, labels):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "edges.tsv"), "w", encoding="utf-8") as fh:
        fh.write("# source target\n")
        for u, v in sorted(edges):
            fh.write(f"{u}\t{v}\n")
    with open(os.path.join(out_dir, "features.csv"), "w", encoding="utf-8") as fh:
        for row in features:
            fh.write(",".join(str(int(x)) if float(x).is_integer() else repr(float(x))
                              for x in row) + "\n")
    with open(os.path.join(out_dir, "labels.csv"), "w", encoding="utf-8") as fh:
        fh.write("node,label\n")
        for i, lab in enumerate(labels):
            fh.write(f"{i},{lab}\n")


def convert_webkb(raw_dir: str, out_root: str, name: str):
    nodes = {}
    with open(os.path.join(raw_dir, f"{name}_nfl.txt"), encoding="utf-8") as fh:
        header = fh.readline()
        assert "node_id" in header
        for line in fh:
            parts = line.strip().split("\t")
            if len(parts) != 3:
                continue
            nid = int(parts[0])
            feats = [int(tok) for tok in parts[1].split(",")]
            nodes[nid] = (feats, int(parts[2]))
    n = max(nodes) + 1
    assert sorted(nodes) == list(range(n)), f"{name}: node ids are not contiguous"

    edges = set()
    with open(os.path.join(raw_dir, f"{name}_edges.txt"), encoding="utf-8") as fh:
        header = fh.readline()
        assert "node_id" in header
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            u, v = int(parts[0]), int(parts[1])
            if u == v:
                continue
            edges.add((min(u, v), max(u, v)))

    features = [nodes[i][0] for i in range(n)]
    labels = [nodes[i][1] for i in range(n)]
    _write_triple(os.path.join(out_root, name), sorted(edges), features, labels)
    print(f"  {name}: n={n} m={len(edges)} d={len(features[0])} "
          f"c={len(set(labels))}")


def convert_cora(raw_dir: str, out_root: str):
    ids, features, label_names = [], [], []
    with open(os.path.join(raw_dir, "cora.content"), encoding="utf-8") as fh:
        for line in fh:
            parts = line.strip().split("\t")
            if len(parts) < 3:
                continue
            ids.append(parts[0])
            features.append([int(tok) for tok in parts[1:-1]])
            label_names.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    classes = sorted(set(label_names))
    class_index = {c: i for i, c in enumerate(classes)}
    labels = [class_index[c] for c in label_names]

    edges = set()
    dangling = 0
    with open(os.path.join(raw_dir, "cora.cites"), encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            a, b = parts
            if a not in index or b not in index:
                dangling += 1
                continue
            u, v = index[a], index[b]
            if u == v:
                continue
            edges.add((min(u, v), max(u, v)))

    _write_triple(os.path.join(out_root, "cora"), sorted(edges), features, labels)
    print(f"  cora: n={len(ids)} m={len(edges)} d={len(features[0])} "
          f"c={len(classes)} dangling_citations={dangling}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output root directory")
    parser.add_argument("--from-dir", help="convert raw files from this directory "
                                           "instead of downloading")
    parser.add_argument("--raw-dir", default="data/_raw", help="download cache")
    parser.add_argument("--only", nargs="*", help="subset of datasets")
    args = parser.parse_args()

    names = args.only or list(WEBKB) + ["cora"]
    raw_dir = args.from_dir or args.raw_dir
    if not args.from_dir:
        fetch_raw(raw_dir, names)

    print("converting:")
    for name in names:
        if name in WEBKB:
            convert_webkb(raw_dir, args.out, name)
        elif name == "cora":
            convert_cora(raw_dir, args.out)
        else:
            raise SystemExit(f"unknown dataset {name!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
