#!/usr/bin/env python3
"""
End-to-end tests of the command-line entry point.
"""
import json

import pandas as pd
import pytest

from bench_harness import REPORT_COLUMNS
from main import main


def _simulate(tmp_path, name="pool.csv", *extra):
    path = tmp_path / name
    assert main(["simulate", "--output", str(path), *extra]) == 0
    return path


def test_simulate_layout(tmp_path):
    path = _simulate(tmp_path, "pool.csv", "--model", "conditional_mean", "--n", "1000", "--d", "20",
                     "--s", "5", "--seed", "7")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x"] + [f"z{j}" for j in range(1, 21)] + ["y"]
    assert len(frame) == 1000
    truth = json.loads((tmp_path / "pool.truth.json").read_text())
    assert truth["s"] == 5 and len(truth["theta_star"]) == 20


def test_simulate_is_deterministic(tmp_path):
    args = ("--model", "logistic", "--n", "300", "--d", "6", "--s", "2", "--seed", "11")
    first = _simulate(tmp_path, "a.csv", *args)
    second = _simulate(tmp_path, "b.csv", *args)
    assert first.read_bytes() == second.read_bytes()


def test_simulate_rejects_zero_dimension(tmp_path, capsys):
    code = main(["simulate", "--d", "0", "--output", str(tmp_path / "bad.csv")])
    assert code == 2
    assert "data.d" in capsys.readouterr().err


def test_unknown_key_exit_code(tmp_path, capsys):
    code = main(["schedule", "--set", "pipeline.speed=3"])
    assert code == 2
    assert "pipeline.speed" in capsys.readouterr().err


def test_schedule(tmp_path, capsys):
    out = tmp_path / "schedule.csv"
    code = main(["schedule", "--beta", "2", "--s", "10", "--d", "200", "--n", "20000", "--budget", "2000",
                 "-o", str(out)])
    assert code == 0
    assert "K=2" in capsys.readouterr().out
    frame = pd.read_csv(out)
    assert list(frame["k"]) == [1, 2]
    assert list(frame.columns) == ["k", "n_k", "delta", "lam", "b_prev"]


def test_schedule_below_one_is_a_runtime_error():
    assert main(["schedule", "--beta", "0.5"]) == 3


def test_fit_two_step(tmp_path):
    data = _simulate(tmp_path, "pool.csv", "--n", "4000", "--d", "10", "--s", "3", "--seed", "2")
    out = tmp_path / "report.json"
    assert main(["fit", str(data), "--budget", "1000", "--k", "2", "--seed", "1", "-o", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["k"] == 2
    assert len(report["theta_per_iter"]) == 2
    assert report["b_hat"] is not None
    theta = pd.read_csv(tmp_path / "report.theta.csv")
    assert len(theta) == 10


def test_fit_theory_mode(tmp_path):
    data = _simulate(tmp_path, "pool.csv", "--model", "logistic", "--n", "6000", "--d", "10", "--s", "3",
                     "--seed", "9")
    out = tmp_path / "report.json"
    code = main(["fit", str(data), "--mode", "theory", "--beta", "1", "--s", "3", "--budget", "2000",
                 "--seed", "9", "-o", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    # ceil(log_3(log 2000)) = 2
    assert report["k"] == 2
    assert len(report["theta_per_iter"]) == 2


def test_fit_budget_beyond_labels(tmp_path):
    data = _simulate(tmp_path, "pool.csv", "--n", "200", "--d", "5", "--s", "2")
    assert main(["fit", str(data), "--budget", "500", "-o", str(tmp_path / "r.json")]) == 4


def test_benchmark_csv(tmp_path):
    cfg = tmp_path / "bench.toml"
    cfg.write_text(
        "seed = 3\nworkers = 1\n"
        "[data]\nmodel = \"conditional_mean\"\nn = 2000\nd = 10\ns = 3\n"
        "[pipeline]\nbudget = 300\n"
        "[bench]\nmethods = [\"passive_pf\"]\nreps = 2\neval_n = 2000\n"
    )
    out = tmp_path / "bench.csv"
    assert main(["benchmark", "--config", str(cfg), "-o", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == REPORT_COLUMNS
    assert set(frame["metric"]) == {"l1", "l2", "linf", "pred_err"}
    assert (frame["reps"] == 2).all()


def test_sweep_auto10(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--b-grid", "auto10", "--model", "logistic", "--n", "3000", "--d", "10", "--s", "3",
                 "--budget", "800", "--reps", "1", "--workers", "1", "--seed", "5",
                 "--set", 'bench.methods=["twostep_pf"]', "--set", "bench.eval_n=2000", "-o", str(out)])
    assert code == 0
    frame = pd.read_csv(out)
    assert frame["b"].nunique() == 10


def test_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    for key in ("pipeline.budget", "solver.eps_tgt", "kernel.order", "bench.sweep", "theory.beta"):
        assert key in text


def test_unwritable_output_exit_code(tmp_path, capsys):
    out = tmp_path / "missing" / "schedule.csv"
    assert main(["schedule", "--beta", "2", "-o", str(out)]) == 2
    assert "cannot write" in capsys.readouterr().err


def test_fit_report_into_missing_directory(tmp_path, capsys):
    data = _simulate(tmp_path, "pool.csv", "--n", "2000", "--d", "5", "--s", "2", "--seed", "3")
    out = tmp_path / "missing" / "report.json"
    assert main(["fit", str(data), "--budget", "300", "--k", "1", "-o", str(out)]) == 2
    assert "cannot write" in capsys.readouterr().err


def test_missing_dataset_exit_code(tmp_path, capsys):
    assert main(["fit", str(tmp_path / "absent.csv"), "-o", str(tmp_path / "r.json")]) == 2
    assert "cannot read dataset" in capsys.readouterr().err
