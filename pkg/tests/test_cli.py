"""End-to-end CLI coverage through click's test runner."""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from wcmean.cli import main

SMALL_EXP = ["--m", "60", "--t-max", "8", "--eps", "0.05"]


@pytest.fixture
def runner():
    return CliRunner()


def gen(runner, tmp_path, process, *extra):
    out = tmp_path / f"{process}.json"
    result = runner.invoke(
        main, ["generate", process, "--out", str(out), "--m", "40", *extra]
    )
    assert result.exit_code == 0, result.output
    return out


# ── generate ─────────────────────────────────────────────────────────


def test_generate_importance_writes_dist_and_meta(runner, tmp_path):
    out = gen(runner, tmp_path, "importance")
    meta = json.loads((tmp_path / "importance.meta.json").read_text())
    data = json.loads(out.read_text())
    assert len(data["pairs"]) == 40
    assert len(meta["groups"]) == 2
    assert meta["seed"] == 0


def test_generate_snowball_variant_flags(runner, tmp_path):
    out = gen(
        runner,
        tmp_path,
        "snowball",
        "--k", "8",
        "--graph", "mutual",
        "--traversal", "rounds",
        "--start-policy", "fixed",
        "--stall", "redraw",
    )
    meta = json.loads((tmp_path / "snowball.meta.json").read_text())
    assert meta["graph"] == "mutual"
    assert meta["traversal"] == "rounds"
    assert meta["start"] == "fixed"
    assert meta["stall"] == "redraw"
    data = json.loads(out.read_text())
    assert all(len(p["A"]) == 8 for p in data["pairs"])
    assert len(meta["points"]) == 50


def test_generate_selective_counts_pairs(runner, tmp_path):
    out = gen(runner, tmp_path, "selective")
    data = json.loads(out.read_text())
    assert len(data["pairs"]) == 129


def test_generate_selective_overlap_flag(runner, tmp_path):
    out = gen(runner, tmp_path, "selective", "--overlap")
    meta = json.loads((tmp_path / "selective.meta.json").read_text())
    assert meta["window_convention"] == "overlap"
    data = json.loads(out.read_text())
    pair = data["pairs"][6]  # t=2, w=1 under the default window list
    assert set(pair["A"]) & set(pair["B"])


def test_generate_rejects_bad_windows(runner, tmp_path):
    result = runner.invoke(
        main,
        ["generate", "selective", "--out", str(tmp_path / "x.json"), "--windows", "a,b"],
    )
    assert result.exit_code == 2


def test_generate_determinism(runner, tmp_path):
    a = gen(runner, tmp_path, "snowball")
    text_a = a.read_text()
    b_dir = tmp_path / "again"
    b_dir.mkdir()
    b = gen(runner, b_dir, "snowball")
    assert text_a == b.read_text()


# ── optimize ─────────────────────────────────────────────────────────


def test_optimize_writes_all_outputs(runner, tmp_path):
    dist = gen(runner, tmp_path, "importance")
    est = tmp_path / "est.json"
    result = runner.invoke(
        main,
        [
            "optimize",
            "--dist", str(dist),
            "--regime", "l2",
            "--t-max", "10",
            "--eps", "0.05",
            "--out", str(est),
        ],
    )
    assert result.exit_code == 0, result.output
    assert est.exists()
    summary = json.loads((tmp_path / "est.summary.json").read_text())
    assert "best_value" in summary
    trace_lines = (tmp_path / "est.trace.csv").read_text().strip().splitlines()
    assert len(trace_lines) >= 2


def test_optimize_missing_dist_is_usage_error(runner, tmp_path):
    result = runner.invoke(
        main,
        ["optimize", "--dist", str(tmp_path / "none.json"), "--regime", "l2",
         "--out", str(tmp_path / "e.json")],
    )
    assert result.exit_code == 2


# ── evaluate ─────────────────────────────────────────────────────────


def test_evaluate_baselines_on_datasets(runner, tmp_path):
    dist = gen(runner, tmp_path, "importance")
    out = tmp_path / "report.csv"
    result = runner.invoke(
        main,
        [
            "evaluate",
            "--dist", str(dist),
            "--baseline", "reweighting",
            "--baseline", "sample_mean",
            "--dataset", "constant",
            "--dataset", "worst-l2",
            "--eps", "0.05",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "estimator,dataset,error"
    assert len(lines) == 1 + 4
    # sample-mean weights sum to one, so constant data is recovered exactly
    values = {tuple(l.split(",")[:2]): float(l.split(",")[2]) for l in lines[1:]}
    assert values[("sample_mean", "constant")] == pytest.approx(0.0, abs=1e-9)
    assert all(v >= 0 for v in values.values())
    assert (tmp_path / "report.provenance.json").exists()


def test_evaluate_spatial_dataset_via_metadata(runner, tmp_path):
    dist = gen(runner, tmp_path, "snowball")
    out = tmp_path / "report.csv"
    result = runner.invoke(
        main,
        [
            "evaluate",
            "--dist", str(dist),
            "--baseline", "sample_mean",
            "--dataset", f"spatial:{tmp_path / 'snowball.meta.json'}",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output


def test_evaluate_requires_some_estimator(runner, tmp_path):
    dist = gen(runner, tmp_path, "importance")
    result = runner.invoke(
        main,
        ["evaluate", "--dist", str(dist), "--dataset", "constant",
         "--out", str(tmp_path / "r.csv")],
    )
    assert result.exit_code == 2


def test_evaluate_unknown_dataset_spec(runner, tmp_path):
    dist = gen(runner, tmp_path, "importance")
    result = runner.invoke(
        main,
        ["evaluate", "--dist", str(dist), "--baseline", "sample_mean",
         "--dataset", "mystery", "--out", str(tmp_path / "r.csv")],
    )
    assert result.exit_code == 2


def test_evaluate_malformed_dist_is_schema_error(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    result = runner.invoke(
        main,
        ["evaluate", "--dist", str(bad), "--baseline", "sample_mean",
         "--dataset", "constant", "--out", str(tmp_path / "r.csv")],
    )
    assert result.exit_code == 3


def test_evaluate_thread_env_validation(runner, tmp_path):
    dist = gen(runner, tmp_path, "importance")
    result = runner.invoke(
        main,
        ["evaluate", "--dist", str(dist), "--baseline", "sample_mean",
         "--dataset", "constant", "--out", str(tmp_path / "r.csv")],
        env={"WCE_THREADS": "zero"},
    )
    assert result.exit_code == 2


# ── experiment ───────────────────────────────────────────────────────


def test_experiment_importance_smoke(runner, tmp_path):
    result = runner.invoke(
        main,
        ["experiment", "importance", "--out-dir", str(tmp_path), *SMALL_EXP],
    )
    assert result.exit_code == 0, result.output
    csv_text = (tmp_path / "importance.csv").read_text()
    assert csv_text.startswith("data_values,")
    prov = json.loads((tmp_path / "importance.provenance.json").read_text())
    assert prov["experiment"] == "importance"
    assert "points" not in prov


def test_experiment_seed_averaging(runner, tmp_path):
    result = runner.invoke(
        main,
        ["experiment", "importance", "--out-dir", str(tmp_path),
         "--num-seeds", "2", *SMALL_EXP],
    )
    assert result.exit_code == 0, result.output
    prov = json.loads((tmp_path / "importance.provenance.json").read_text())
    assert prov["seeds"] == [0, 1]


def test_experiment_rejects_bad_num_seeds(runner, tmp_path):
    result = runner.invoke(
        main,
        ["experiment", "importance", "--out-dir", str(tmp_path), "--num-seeds", "0"],
    )
    assert result.exit_code == 2


# ── lowerbound ───────────────────────────────────────────────────────


def half_split_file(tmp_path):
    pairs = [{"A": [0, 1], "B": [2, 3]}, {"A": [2, 3], "B": [0, 1]}]
    path = tmp_path / "half.json"
    path.write_text(json.dumps({"n": 4, "pairs": pairs}))
    return path


def test_lowerbound_with_explicit_subset(runner, tmp_path):
    dist = half_split_file(tmp_path)
    out = tmp_path / "cert.json"
    result = runner.invoke(
        main,
        ["lowerbound", "--dist", str(dist), "--subset", "0,1", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    cert = json.loads(out.read_text())
    assert cert["alpha"] == pytest.approx(1.0)
    assert cert["subset"] == [0, 1]


def test_lowerbound_bruteforce_with_adversary(runner, tmp_path):
    dist = half_split_file(tmp_path)
    out = tmp_path / "cert.json"
    result = runner.invoke(
        main,
        ["lowerbound", "--dist", str(dist), "--baseline", "sample_mean",
         "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    cert = json.loads(out.read_text())
    adv = cert["adversary"]
    assert adv["achieved_error"] >= adv["alpha_over_4"] - 1e-9
    assert np.all(np.abs(adv["x"]) <= 1.0 + 1e-9)


def test_lowerbound_rejects_estimator_and_baseline(runner, tmp_path):
    dist = half_split_file(tmp_path)
    result = runner.invoke(
        main,
        ["lowerbound", "--dist", str(dist), "--baseline", "sample_mean",
         "--estimator", str(dist), "--out", str(tmp_path / "c.json")],
    )
    assert result.exit_code == 2


def test_lowerbound_size_cap_exit_code(runner, tmp_path):
    big = tmp_path / "big.json"
    big.write_text(
        json.dumps({"n": 30, "pairs": [{"A": [0], "B": [1]}]})
    )
    result = runner.invoke(
        main,
        ["lowerbound", "--dist", str(big), "--out", str(tmp_path / "c.json")],
    )
    assert result.exit_code == 5


def test_version_flag(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
