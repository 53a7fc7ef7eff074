#!/usr/bin/env python3
"""Download the LINQS citation datasets and convert them to the subcr layout.

    data/<name>/edges.txt        "src dst" per line, dense 0-based ids
    data/<name>/attributes.csv   headerless CSV, row i = node i
    data/<name>/id_map.txt       "<dense id> <original paper id>"

No labels are written: anomalies are injected by `subcr inject` or on the fly by
`subcr run`. BlogCatalog and Flickr are distributed with injected anomalies as
MATLAB files; convert those separately (edges from the network matrix, labels
from the anomaly vector).

Usage: fetch_datasets.py [--data-dir data] [--from-dir DIR] cora citeseer pubmed
"""

import argparse
import hashlib
import io
import pathlib
import sys
import tarfile
import urllib.request

SOURCES = {
    "cora": "https://linqs-data.soe.ucsc.edu/public/lbc/cora.tgz",
    "citeseer": "https://linqs-data.soe.ucsc.edu/public/lbc/citeseer.tgz",
    "pubmed": "https://linqs-data.soe.ucsc.edu/public/Pubmed-Diabetes.tgz",
}

def fetch(name, from_dir):
    if from_dir:
        path = pathlib.Path(from_dir) / pathlib.Path(SOURCES[name]).name
        data = path.read_bytes()
    else:
        with urllib.request.urlopen(SOURCES[name]) as resp:
            data = resp.read()
    print(f"{name}: {len(data)} bytes sha256={hashlib.sha256(data).hexdigest()}")
    return tarfile.open(fileobj=io.BytesIO(data))


def member(tar, suffix):
    for m in tar.getmembers():
        if m.name.endswith(suffix):
            return tar.extractfile(m).read().decode("utf-8", "replace")
    raise SystemExit(f"archive has no member ending in {suffix}")


def linqs(tar, stem):
    ids, rows = [], []
    for line in member(tar, f"{stem}.content").splitlines():
        parts = line.split()
        if not parts:
            continue
        ids.append(parts[0])
        rows.append(parts[1:-1])
    index = {pid: i for i, pid in enumerate(ids)}
    edges = set()
    for line in member(tar, f"{stem}.cites").splitlines():
        parts = line.split()
        if len(parts) != 2 or parts[0] not in index or parts[1] not in index:
            continue
        u, v = index[parts[0]], index[parts[1]]
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return ids, rows, edges


def pubmed(tar):
    lines = member(tar, "Pubmed-Diabetes.NODE.paper.tab").splitlines()
    words = [f.split(":")[1] for f in lines[1].split("\t")[1:-1]]
    col = {w: i for i, w in enumerate(words)}
    ids, rows = [], []
    for line in lines[2:]:
        parts = line.split("\t")
        if len(parts) < 2:
            continue
        row = ["0"] * len(words)
        for f in parts[2:]:
            if "=" in f:
                w, val = f.split("=")
                if w in col:
                    row[col[w]] = val
        ids.append(parts[0])
        rows.append(row)
    index = {pid: i for i, pid in enumerate(ids)}
    edges = set()
    for line in member(tar, "Pubmed-Diabetes.DIRECTED.cites.tab").splitlines()[2:]:
        parts = line.split("\t")
        if len(parts) != 4:
            continue
        a, b = parts[1].replace("paper:", ""), parts[3].replace("paper:", "")
        if a in index and b in index and a != b:
            u, v = index[a], index[b]
            edges.add((min(u, v), max(u, v)))
    return ids, rows, edges


def write(out, ids, rows, edges):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "edges.txt", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u} {v}\n")
    with open(out / "attributes.csv", "w") as f:
        for row in rows:
            f.write(",".join(row) + "\n")
    with open(out / "id_map.txt", "w") as f:
        for i, pid in enumerate(ids):
            f.write(f"{i} {pid}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("datasets", nargs="+", choices=sorted(SOURCES))
    ap.add_argument("--data-dir", default="data")
    ap.add_argument("--from-dir", help="read the archives from this directory instead of downloading")
    args = ap.parse_args()
    for name in args.datasets:
        tar = fetch(name, args.from_dir)
        ids, rows, edges = pubmed(tar) if name == "pubmed" else linqs(tar, name)
        write(pathlib.Path(args.data_dir) / name, ids, rows, edges)
        features = len(rows[0]) if rows else 0
        print(f"{name}: nodes={len(ids)} edges={len(edges)} features={features}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
