import json
import math
import os
import pathlib
import subprocess

import numpy as np
import pytest

import dhgat

SOURCE = pathlib.Path(os.environ.get("DHGAT_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
PLANTED = SOURCE / "configs" / "planted.ini"
CLI = os.environ.get("DHGAT_CLI")

FAST = {"train.epochs": "40", "planted.nodes": "120"}


def test_label_remap():
    assert dhgat.remap_label("pants-fire") == 0
    assert dhgat.remap_label("  TRUE ") == 5
    assert dhgat.remap_label("half-true") == 3
    with pytest.raises(dhgat.ValidationError):
        dhgat.remap_label("maybe")
    with pytest.raises(ValueError):
        dhgat.remap_label("")


def test_gumbel():
    assert dhgat.gumbel_from_uniform(math.exp(-1.0)) == pytest.approx(0.0, abs=1e-12)
    soft, hard = dhgat.gumbel_select([0.1, 0.9], 1.0, [0.0, 0.0])
    assert soft == pytest.approx([0.1, 0.9])
    assert hard == 1
    soft, hard = dhgat.gumbel_select([0.7, 0.3], 1.0, [0.0, 5.0], train=False)
    assert hard == 0
    soft, hard = dhgat.gumbel_select([0.7, 0.3], 1.0, [0.0, 5.0])
    assert hard == 1


def test_lattice_order():
    assert dhgat.lattice(["speaker", "party"]) == [[], ["speaker"], ["party"], ["speaker", "party"]]
    restricted = dhgat.lattice(["a", "b", "c"], "restricted")
    assert restricted == [[], ["a"], ["b"], ["c"], ["a", "b", "c"]]
    with pytest.raises(dhgat.ConfigError):
        dhgat.lattice(["a", "a"])


def test_hash_embed_unit_norm():
    v = np.asarray(dhgat.hash_embed("taxes went up", 64, 3))
    assert v.shape == (64,)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, dhgat.hash_embed("taxes went up", 64, 3))


def test_metrics():
    probs = np.zeros((4, 6))
    probs[[0, 1, 2, 3], [0, 1, 5, 5]] = 1.0
    m = dhgat.evaluate(probs, [0, 1, 2, 5], [0, 1, 2, 3])
    assert m["count"] == 4
    assert m["accuracy"] == pytest.approx(0.75)
    assert m["ordinal_mae"] == pytest.approx(0.75)
    assert m["confusion"][2][5] == 1


def test_planted_graph():
    features, labels, rels = dhgat.planted_graph(60, 2)
    assert features.shape[0] == 60
    assert len(labels) == 60
    assert set(rels) == {"rel1", "rel2"}
    for u, v in rels["rel1"]:
        assert labels[u] == labels[v]


def test_gradcheck():
    report = dhgat.gradcheck()
    assert report["passed"], report
    assert {c["name"] for c in report["checks"]} >= {"gatv2_layer", "gcn_layer", "dhgat_loss", "gcn_loss"}


def test_train_and_config():
    run = dhgat.train(PLANTED, FAST)
    assert run["model"] == "dhgat"
    assert len(run["loss_curve"]) == 40
    assert 0.0 <= run["metrics"]["accuracy"] <= 1.0
    again = dhgat.train(PLANTED, FAST)
    assert again["metrics"] == run["metrics"]
    gcn = dhgat.train(PLANTED, FAST, model="gcn")
    assert gcn["model"] == "gcn"
    assert "epochs = 40" in dhgat.resolved_config(PLANTED, FAST)
    with pytest.raises(dhgat.ConfigError):
        dhgat.train(PLANTED, {"train.bogus": "1"})


needs_cli = pytest.mark.skipif(CLI is None, reason="DHGAT_CLI not set")


def run_cli(*args, env=None):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, env=env)


def sets(overrides):
    out = []
    for k, v in overrides.items():
        out += ["--set", f"{k}={v}"]
    return out


@needs_cli
def test_cli_train_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        r = run_cli("train", "-c", PLANTED, "-o", d, *sets(FAST))
        assert r.returncode == 0, r.stderr
    assert (a / "metrics.json").read_bytes() == (b / "metrics.json").read_bytes()
    for name in ("train.config.ini", "run.json", "loss.csv", "confusion.csv"):
        assert (a / name).exists(), name
    run = json.loads((a / "run.json").read_text())
    assert len(run["loss_curve"]) == 40


@needs_cli
def test_cli_gradcheck(tmp_path):
    r = run_cli("gradcheck", "-o", tmp_path)
    assert r.returncode == 0, r.stdout + r.stderr
    assert json.loads((tmp_path / "gradcheck.json").read_text())["passed"]
    assert (tmp_path / "gradcheck.config.ini").exists()


@needs_cli
def test_cli_output_dir_from_environment(tmp_path):
    env = dict(os.environ, DHGAT_OUTPUT_DIR=str(tmp_path / "env"))
    r = run_cli("build-graph", "-c", PLANTED, *sets(FAST), env=env)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "env" / "graph_stats.json").exists()


@needs_cli
def test_cli_rejects_unknown_key(tmp_path):
    r = run_cli("train", "-c", PLANTED, "-o", tmp_path, "--set", "train.bogus=1")
    assert r.returncode == 2
    assert "train.bogus" in r.stderr
