#!/usr/bin/env python3
"""
Tests for replicated experiments, aggregation and the report CSV.

The `slow` tests reproduce the full-size comparisons; run them with
`pytest --runslow`.
"""
import numpy as np
import pandas as pd
import pytest

from bench_harness import (
    REPORT_COLUMNS,
    aggregate,
    arm_config,
    log_log_slopes,
    replicate_seed,
    run_b_sweep,
    run_comparison,
    run_rate_scaling,
    sweep_grid,
    write_report_csv,
)
from contracts.errors import ArgumentError
from contracts.models import BenchmarkRow, ExperimentConfig, PipelineConfig, ReplicateRow


def _row(rep, l2, method="passive_pf", b=None, N=None):
    return ReplicateRow(model="logistic", method=method, rep=rep, b=b, N=N, l1=2 * l2, l2=l2, linf=l2,
                        pred_err=0.3, labels_used=100, seconds=0.1)


def _small(**update) -> ExperimentConfig:
    base = dict(model="conditional_mean", n=4000, d=10, s=3, budget=1000, reps=2, seed=3, eval_n=5000,
                workers=1, methods=["passive_pf", "twostep_pf", "passive_lr", "twostep_lr"])
    base.update(update)
    return ExperimentConfig(**base)


def test_replicate_seeds_differ():
    seeds = {replicate_seed(0, r) for r in range(20)}
    assert len(seeds) == 20
    assert replicate_seed(0, 3) == replicate_seed(0, 3)


def test_arm_config():
    pipe = PipelineConfig(split=[0.2, 0.8])
    passive = arm_config(pipe, "passive_lr", 500)
    assert (passive.k, passive.loss, passive.split, passive.budget) == (1, "logistic", None, 500)
    fixed = arm_config(pipe, "twostep_pf", 500, b=0.7)
    assert (fixed.k, fixed.b, fixed.split) == (2, [0.7], [0.2, 0.8])
    assert arm_config(pipe, "twostep_pf", 500).b is None


def test_aggregate_single_replicate():
    rows = aggregate([_row(0, 0.4)])
    l2 = next(r for r in rows if r.metric == "l2")
    assert (l2.mean, l2.sd, l2.reps, l2.degenerate_sd) == (0.4, 0.0, 1, True)
    assert len(rows) == 4


def test_aggregate_mean_and_sd():
    rows = aggregate([_row(0, 0.2), _row(1, 0.4), _row(2, 0.6)])
    l2 = next(r for r in rows if r.metric == "l2")
    assert l2.mean == pytest.approx(0.4)
    assert l2.sd == pytest.approx(0.2)
    assert l2.reps == 3 and not l2.degenerate_sd
    assert aggregate([]) == []


def test_aggregate_keeps_b_groups():
    rows = aggregate([_row(0, 0.2, b=0.5), _row(0, 0.3, b=1.0), _row(1, 0.5, b=1.0)])
    l2 = {r.b: r for r in rows if r.metric == "l2"}
    assert l2[0.5].reps == 1 and l2[1.0].reps == 2
    assert l2[1.0].mean == pytest.approx(0.4)


def test_log_log_slopes():
    rows = [BenchmarkRow(model="logistic", method="twostep_pf", metric="l2", N=N, mean=5 * N ** -0.5, sd=0.0, reps=3)
            for N in (500, 1000, 2000, 4000)]
    slopes = log_log_slopes(rows)
    assert slopes["twostep_pf"] == pytest.approx(-0.5)
    assert log_log_slopes([]) == {}


def test_comparison_report_and_csv(tmp_path):
    pipe = PipelineConfig(b_grid=[1.5, 2.0, 3.0])
    report = run_comparison(_small(), pipe, workers=1)
    assert report.failures == 0
    assert len(report.replicates) == 8
    assert len(report.rows) == 16
    assert all(r.reps == 2 for r in report.rows)
    assert [r.model_dump() for r in aggregate(report.replicates)] == [r.model_dump() for r in report.rows]

    path = write_report_csv(report, tmp_path / "bench.csv", tmp_path / "bench.detail.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == REPORT_COLUMNS
    assert set(frame["method"]) == {"passive_pf", "twostep_pf", "passive_lr", "twostep_lr"}
    detail = pd.read_csv(tmp_path / "bench.detail.csv")
    assert len(detail) == 8
    assert (detail["labels_used"] <= 2 * 1000).all()


def test_results_do_not_depend_on_workers():
    exp = _small(methods=["passive_pf"], reps=3)
    inline = run_comparison(exp, workers=1)
    pooled = run_comparison(exp, workers=2)
    strip = lambda rows: [r.model_dump(exclude={"seconds"}) for r in rows]
    assert strip(inline.replicates) == strip(pooled.replicates)


def test_small_conditional_mean_comparison():
    """Scaled-down passive vs two-step run: budgets hold and the two-step error stays on the passive scale."""
    exp = _small(n=8000, reps=3, methods=["passive_pf", "twostep_pf"])
    report = run_comparison(exp, workers=1)
    assert report.failures == 0
    twostep = _mean(report, "twostep_pf")
    assert twostep <= 0.5
    assert twostep <= 2.5 * _mean(report, "passive_pf")
    labels = [r.labels_used for r in report.replicates if r.method == "twostep_pf"]
    assert all(abs(n - 1000) <= 3 * np.sqrt(1000) for n in labels)


def test_b_sweep_repeats_passive_rows():
    exp = _small(methods=["passive_pf", "twostep_pf"], reps=1, sweep=[1.5, 2.5], budget=800)
    report = run_b_sweep(exp, workers=1)
    assert report.failures == 0
    passive = [r for r in report.rows if r.method == "passive_pf" and r.metric == "l2"]
    assert sorted(r.b for r in passive) == [1.5, 2.5]
    assert passive[0].mean == passive[1].mean
    assert {r.b for r in report.rows if r.method == "twostep_pf"} == {1.5, 2.5}


def test_sweep_grid():
    assert sweep_grid(_small(sweep=[2.0, 0.5])) == [0.5, 2.0]
    auto = sweep_grid(_small(sweep="auto10"))
    assert len(auto) == 10 and auto == sorted(auto)
    with pytest.raises(ArgumentError):
        sweep_grid(_small())


def test_rate_scaling_needs_three_budgets():
    with pytest.raises(ArgumentError):
        run_rate_scaling(_small(scaling=[500, 1000]))


# ============================================================================
# Full-size comparisons
# ============================================================================

def _mean(report, method, metric="l2"):
    return next(r.mean for r in report.rows if r.method == method and r.metric == metric)


@pytest.mark.slow
def test_conditional_mean_comparison():
    exp = ExperimentConfig(model="conditional_mean", n=20000, d=200, s=10, budget=2000, reps=50, seed=1,
                           methods=["passive_pf", "twostep_pf"])
    report = run_comparison(exp)
    assert 0.22 <= _mean(report, "twostep_pf") <= 0.42
    assert 0.42 <= _mean(report, "passive_pf") <= 0.65
    for metric in ("l1", "l2"):
        assert _mean(report, "twostep_pf", metric) <= 0.75 * _mean(report, "passive_pf", metric)


@pytest.mark.slow
def test_logistic_comparison():
    exp = ExperimentConfig(model="logistic", n=20000, d=200, s=10, budget=2000, reps=50, seed=2,
                           methods=["passive_pf", "twostep_pf"])
    report = run_comparison(exp)
    assert 0.80 <= _mean(report, "twostep_pf") / _mean(report, "passive_pf") <= 1.10


@pytest.mark.slow
def test_binary_response_comparison():
    exp = ExperimentConfig(model="binary_response", n=20000, d=200, s=10, budget=2000, reps=50, seed=3,
                           methods=["twostep_pf"])
    report = run_comparison(exp)
    assert 0.22 <= _mean(report, "twostep_pf") <= 0.45


@pytest.mark.slow
def test_b_sweep_pattern():
    exp = ExperimentConfig(model="conditional_mean", n=20000, d=200, s=10, budget=2000, reps=50, seed=4,
                           methods=["passive_pf", "twostep_pf"], sweep="auto10")
    report = run_b_sweep(exp)
    l2 = [r for r in report.rows if r.metric == "l2"]
    passive = next(r for r in l2 if r.method == "passive_pf")
    active = sorted((r for r in l2 if r.method == "twostep_pf"), key=lambda r: r.b)

    def pooled_se(a, b):
        return np.sqrt(a.sd ** 2 / a.reps + b.sd ** 2 / b.reps)

    best = min(active, key=lambda r: r.mean)
    assert passive.mean - best.mean >= 2 * pooled_se(passive, best)
    widest = active[-1]
    assert abs(passive.mean - widest.mean) <= 2 * pooled_se(passive, widest)


@pytest.mark.slow
def test_rate_scaling_slope():
    exp = ExperimentConfig(model="conditional_mean", n=20000, d=200, s=10, budget=2000, reps=30, seed=5,
                           methods=["twostep_pf"], scaling=[500, 1000, 2000, 4000])
    report = run_rate_scaling(exp)
    assert -0.65 <= report.slopes["twostep_pf"] <= -0.35
