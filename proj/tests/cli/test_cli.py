import csv
import filecmp
import json
import os
import subprocess
from pathlib import Path

import pytest

BIN = os.environ.get("SUBCR_BIN", "subcr")

TOY = """
[dataset]
name = "toy"
edges = "toy/edges.txt"
attributes = "toy/attributes.csv"
[injection]
anomalies = 20
clique_size = 5
[model]
embedding_dim = 16
[train]
epochs = 3
batch_size = 64
[inference]
rounds = 3
"""


def subcr(*args, cwd, env=None, check=True):
    proc = subprocess.run([BIN, *map(str, args)], cwd=cwd, env={**os.environ, **(env or {})},
                          capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"exit {proc.returncode}: {proc.stderr}")
    return proc


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    subcr("synth", "--out", "data/toy", "--nodes", 200, "--edges", 400, "--features", 30,
          "--communities", 3, "--words", 5, "--seed", 1, cwd=root)
    (root / "toy.toml").write_text(TOY)
    return root


def run_args(out, *extra):
    return ("run", "-c", "toy.toml", "--data-dir", "data", "--out", out, "-q", *extra)


def test_inject_is_seeded(work):
    subcr("inject", "-c", "toy.toml", "--data-dir", "data", "--out", "inj_a", "--seed", 1, cwd=work)
    subcr("inject", "-c", "toy.toml", "--data-dir", "data", "--out", "inj_b", "--seed", 1, cwd=work)
    subcr("inject", "-c", "toy.toml", "--data-dir", "data", "--out", "inj_c", "--seed", 2, cwd=work)
    files = ["edges.txt", "attributes.csv", "labels.txt", "manifest.json"]
    assert filecmp.cmpfiles(work / "inj_a", work / "inj_b", files, shallow=False)[0] == files
    assert not filecmp.cmp(work / "inj_a/labels.txt", work / "inj_c/labels.txt", shallow=False)
    labels = (work / "inj_a/labels.txt").read_text().split()
    assert sum(map(int, labels)) == 20
    manifest = json.loads((work / "inj_a/manifest.json").read_text())
    assert manifest["seed"] == 1 and len(manifest["cliques"]) == 2 and len(manifest["attribute_nodes"]) == 10


def test_missing_attributes_exit_2(work):
    (work / "broken").mkdir(exist_ok=True)
    (work / "broken/edges.txt").write_text("0 1\n")
    cfg = work / "broken.toml"
    cfg.write_text(TOY.replace("toy/", "broken/"))
    proc = subcr("inject", "-c", cfg, "--data-dir", "data_missing", "--out", "x", cwd=work, check=False)
    assert proc.returncode == 2 and "data_missing/broken/edges.txt" in proc.stderr
    proc = subcr("run", "-c", cfg, "--data-dir", ".", "--out", "x", cwd=work, check=False)
    assert proc.returncode == 2 and "broken/attributes.csv" in proc.stderr


def test_run_outputs_and_reproducibility(work):
    first = subcr(*run_args("r1"), cwd=work).stdout
    subcr(*run_args("r2"), cwd=work)
    assert "[low-round]" in first and "auc=" in first
    for name in ["checkpoint.bin", "epoch_log.csv", "scores.csv", "roc.csv", "roc.svg", "summary.json"]:
        assert (work / "r1" / name).exists()
    for name in ["checkpoint.bin", "scores.csv", "roc.csv"]:
        assert filecmp.cmp(work / "r1" / name, work / "r2" / name, shallow=False)
    with open(work / "r1/scores.csv") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 200
    subcr(*run_args("r3", "--seed", 5), cwd=work)
    assert not filecmp.cmp(work / "r1/scores.csv", work / "r3/scores.csv", shallow=False)


def test_flags_override_config(work):
    subcr(*run_args("sw1", "--variant", "sub-weight", "--rounds", 2, "--epochs", 1), cwd=work)
    summary = json.loads((work / "sw1/summary.json").read_text())
    train = summary["config"]["train"]
    assert train["variant"] == "sub-weight" and train["effective_gamma"] == 1.0 and train["epochs"] == 1
    assert summary["config"]["inference"]["rounds"] == 2


def test_staged_commands_match_run(work):
    subcr(*run_args("full"), cwd=work)
    base = ("-c", "toy.toml", "--data-dir", "data", "-q")
    subcr("train", *base, "--out", "staged", cwd=work)
    subcr("score", *base, "--out", "staged", "--checkpoint", "staged/checkpoint.bin", cwd=work)
    subcr("eval", *base, "--out", "staged", "--scores", "staged/scores.csv", cwd=work)
    assert filecmp.cmp(work / "full/scores.csv", work / "staged/scores.csv", shallow=False)
    assert filecmp.cmp(work / "full/roc.csv", work / "staged/roc.csv", shallow=False)


def test_cache_dir(work):
    env = {"SUBCR_CACHE_DIR": str(work / "cache")}
    out = subcr("diffuse", "-c", "toy.toml", "--data-dir", "data", "--out", "d", cwd=work, env=env).stdout
    again = subcr("diffuse", "-c", "toy.toml", "--data-dir", "data", "--out", "d", cwd=work, env=env).stdout
    assert "computed" in out and "cache" in again
    assert len(list((work / "cache").iterdir())) == 1


def test_sweep(work):
    proc = subcr("sweep", "-c", "toy.toml", "--data-dir", "data", "--out", "s0", cwd=work, check=False)
    assert proc.returncode == 2
    (work / "sweep.toml").write_text(TOY + "[sweep]\ngamma = [0.0, 0.5, 1.0]\n")
    subcr("sweep", "-c", "sweep.toml", "--data-dir", "data", "--out", "s1", "--jobs", 2, "-q", cwd=work)
    with open(work / "s1/sweep.csv") as f:
        rows = list(csv.DictReader(f))
    assert [float(r["gamma"]) for r in rows] == [0.0, 0.5, 1.0]
    assert all(r["status"] == "ok" for r in rows)


def test_bad_flags(work):
    assert subcr(*run_args("bad", "--variant", "nope"), cwd=work, check=False).returncode == 2
    assert subcr("run", "--no-such-flag", cwd=work, check=False).returncode == 2
