import json
import math

import numpy as np
import pytest

from profilelab import cli, harness
from profilelab.harness import (
    ConvergenceReport,
    ExperimentConfig,
    emit_report,
    ks_critical,
    ks_statistic,
    rep_rng,
    run_convergence,
    run_identity_suite,
)
from profilelab.weight_model import WeightModel


SMALL_SIZES = {
    "tau_reps": 2000,
    "yule_n": 500,
    "yule_reps": 800,
    "dirichlet_n": 2000,
    "dirichlet_reps": 200,
    "bridge_n": 100,
    "bridge_reps": 2,
    "hn_n": 2000,
    "cn_asym_n": 10**5,
    "oracle_n": 3,
    "meanprof_n": 30,
    "meanprof_reps": 2000,
    "fixpoint_m": 4000,
    "fixpoint_k": 10,
    "connection_n": 800,
    "connection_reps": 300,
}


def test_ks_statistic_edges():
    a = list(range(100))
    assert ks_statistic(a, a) == 0.0
    assert ks_statistic(a, [x + 1000 for x in a]) == 1.0
    with pytest.raises(ValueError):
        ks_statistic([1.0], a)


def test_ks_statistic_uniform_one_sample():
    u = np.random.default_rng(1).random(10**4)
    stat = ks_statistic(u, lambda x: np.clip(x, 0, 1))
    assert stat < ks_critical(10**4, 0.01)


def test_rep_rng_deterministic_and_distinct():
    a = rep_rng(5, 1, 0).random(4)
    b = rep_rng(5, 1, 0).random(4)
    c = rep_rng(5, 1, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_emit_report_csv_shapes():
    empty = ConvergenceReport(preset="bst", n=100, reps=0, seed=0)
    text = emit_report(empty, "csv", None)
    assert text.strip().count("\n") == 0  # header only
    header_fields = text.strip().split(",")
    assert "ratio_mean" in header_fields


def test_emit_report_json_round_trip(tmp_path):
    rep = ConvergenceReport(preset="bst", n=100, reps=1, seed=0, rows=[{"c": 2.0}])
    path = tmp_path / "r.json"
    emit_report(rep, "json", str(path))
    doc = json.loads(path.read_text())
    assert doc["preset"] == "bst"
    assert doc["rows"][0]["c"] == 2.0


def test_identity_suite_small_sizes():
    cfg = ExperimentConfig(seed=17, suite_sizes=dict(SMALL_SIZES))
    gates = run_identity_suite(cfg)
    names = {g.name for g in gates}
    assert "martingale_oracle" in names and "ranges" in names
    hard_failures = [g.name for g in gates if g.hard and not g.passed]
    assert not hard_failures, hard_failures


def test_identity_suite_corrupted_model_skips(monkeypatch):
    bad = WeightModel(b=2, d=1, atoms=((0.5, ((1,), (1,))), (0.6, ((0,), (0,)))))
    monkeypatch.setattr(harness, "_suite_model", lambda name: bad)
    gates = run_identity_suite(ExperimentConfig(seed=1))
    by_name = {g.name: g for g in gates}
    assert not by_name["preset_validation"].passed
    assert by_name["bridge_identity"].stats.get("skipped")


def test_run_convergence_small():
    cfg = ExperimentConfig(
        preset="bst", n=10**4, reps=8, c_grid=(1.5, 2.0), seed=4,
        pool_size=2000, pool_iters=8,
    )
    rep = run_convergence(cfg)
    assert len(rep.rows) == 2
    for row in rep.rows:
        assert math.isfinite(row["ratio_mean"])
        assert 0.0 <= row["ks_to_pool"] <= 1.0
        assert row["reps"] == 8


def test_run_convergence_rejects_boundary_grid():
    from profilelab.spectral import RangeError, range_d1
    from profilelab.weight_model import preset

    dom = range_d1(preset("bst"))
    cfg = ExperimentConfig(preset="bst", n=1000, reps=2, c_grid=(dom.c_hi,), seed=0)
    with pytest.raises(RangeError):
        run_convergence(cfg)


def test_config_from_json():
    cfg = ExperimentConfig.from_json(
        '{"preset": "rrt", "n": 500, "reps": 3, "c_grid": [1.0], "thresholds": {"ks_soft": 0.2}}'
    )
    assert cfg.preset == "rrt" and cfg.reps == 3
    assert cfg.thresholds["ks_soft"] == 0.2
    assert cfg.thresholds["ratio_mean_rel"] == 0.10  # defaults retained
    with pytest.raises(ValueError):
        ExperimentConfig.from_json('{"bogus": 1}')


def test_cli_grow_csv(capsys):
    rc = cli.main(["grow", "--preset", "bst", "--nodes", "20", "--seed", "1", "--format", "csv"])
    assert rc == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert sum(int(r.split(",")[1]) for r in rows) == 21


def test_cli_grow_trace_round_trip(tmp_path, capsys):
    trace = tmp_path / "t.json"
    rc = cli.main([
        "grow", "--preset", "rrt", "--nodes", "15", "--seed", "2",
        "--trace", str(trace), "--format", "json",
    ])
    assert rc == 0
    doc = json.loads(trace.read_text())
    assert len(doc["steps"]) == 15
    prof = json.loads(capsys.readouterr().out)
    assert prof["n"] == 15


def test_cli_range_json(capsys):
    assert cli.main(["range", "--preset", "rrt"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["z0"] == 0.0
    assert abs(doc["z1"] - math.e) < 1e-9
    assert doc["theta_interval"][1] is None


def test_cli_normalize_headers(capsys):
    assert cli.main(["normalize", "--preset", "bst", "--nodes", "10000", "--c", "1.5,2.0"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "c,theta,l_n,log_A_c"
    assert len(out) == 3
    assert cli.main(["normalize", "--preset", "bst", "--nodes", "10000", "--l", "12"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "l,theta,log_A_bar"


def test_cli_fixpoint_json(capsys):
    rc = cli.main([
        "fixpoint", "--preset", "bst", "--theta", "0.2",
        "--pool", "2000", "--iters", "6", "--seed", "9",
    ])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) >= {"theta", "mean", "var", "ks"}
    assert abs(doc["mean"] - 1.0) < 0.1


def test_cli_oracle(capsys):
    assert cli.main(["oracle", "--preset", "rrt", "--nodes", "4"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert all(len(r.split(",")) == 2 for r in out)
    assert cli.main(["oracle", "--preset", "rrt", "--nodes", "4", "--martingale-check"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["max_deviation"] < 1e-12


def test_cli_domain_error_exit_code(capsys):
    assert cli.main(["range", "--preset", "nosuch"]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_fixpoint_outside_region(capsys):
    rc = cli.main([
        "fixpoint", "--preset", "bst", "--theta", "-5.0",
        "--pool", "100", "--iters", "2", "--seed", "0",
    ])
    assert rc == 2


def test_monotone_trend_smoke():
    # sup_c |mean ratio - pool mean| shrinks with n in median over seeds
    stats = {n: [] for n in (10**4, 10**6)}
    for n in stats:
        for seed in range(3):
            cfg = ExperimentConfig(
                preset="bst", n=n, reps=6, c_grid=(1.5, 2.5), seed=seed,
                pool_size=3000, pool_iters=8,
            )
            rep = run_convergence(cfg)
            stats[n].append(
                max(abs(r["ratio_mean"] - r["pool_mean"]) for r in rep.rows)
            )
    assert np.median(stats[10**6]) <= np.median(stats[10**4])
