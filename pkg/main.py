# main.py
"""
Command-line entry point for Cutpoint.

Subcommands:
1. simulate  - draw a simulated pool and write it as CSV
2. fit       - fit a threshold on a dataset CSV under a label budget
3. benchmark - replicated method comparison (or rate scaling with bench.scaling)
4. sweep     - two-step runs across a grid of active-set half-widths
5. schedule  - print the theory tuning schedule for a smoothness level

Exit codes: 0 ok, 2 configuration/arguments, 3 runtime, 4 label budget.
"""
import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

import config
from bench_harness import run_b_sweep, run_comparison, run_rate_scaling, write_report_csv
from contracts.errors import ArgumentError, ConfigError, CutpointError
from infra.logging import log_error, log_event
from pipeline import fit, theory_schedule
from services.active_sampling import FileLabelOracle
from services.datagen import make_truth, generate_pool, read_pool_csv, write_pool_csv


def _parse_grid(text: Optional[str]):
    if text is None:
        return None
    text = text.strip()
    if text == "auto10":
        return "auto10"
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse grid '{text}'", key="bench.sweep") from e


def _sidecar(output: Path, suffix: str) -> Path:
    return output.with_name(f"{output.stem}.{suffix}")


@contextmanager
def _writing(path):
    """OS failures while writing `path` become argument errors (exit 2)."""
    try:
        yield
    except OSError as e:
        raise ArgumentError(f"cannot write {path}: {e}") from e


def _banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)


# ============================================================================
# Subcommands
# ============================================================================

def cmd_simulate(args, cfg: config.AppConfig) -> int:
    data = cfg.data
    truth = make_truth(data.model, data.d, data.s, cfg.seed, sigma=data.sigma, mu=data.mu, eps_sd=data.eps_sd)
    pool = generate_pool(truth, data.n, cfg.seed, key="pool")
    output = Path(args.output or "pool.csv")
    write_pool_csv(pool, output)
    truth_path = _sidecar(output, "truth.json")
    with _writing(truth_path):
        truth_path.write_text(json.dumps({
            "model": truth.model, "d": truth.d, "s": truth.s, "seed": cfg.seed,
            "theta_star": truth.theta_star.tolist(),
        }, indent=2))
    print(f"wrote {len(pool)} rows to {output} (theta* in {truth_path})")
    return 0


def cmd_fit(args, cfg: config.AppConfig) -> int:
    pipe = cfg.pipeline_config()
    pool, has_labels = read_pool_csv(args.data)
    if not has_labels:
        raise ConfigError(f"{args.data} has no 'y' column to label from", key="data")
    oracle = FileLabelOracle(args.data, pipe.budget)
    oracle.ensure_capacity()

    report = fit(pool, oracle, pipe, cfg.seed)

    output = Path(args.output or "fit_report.json")
    with _writing(output):
        output.write_text(report.model_dump_json(indent=2))
    theta_path = _sidecar(output, "theta.csv")
    with _writing(theta_path):
        pd.DataFrame({"theta": report.theta_hat}).to_csv(theta_path, index_label="j", float_format="%.17g")

    _banner("FIT REPORT")
    print(f"mode={report.mode} loss={report.loss} iterations={report.k} labels={report.labels_total}")
    for k, (lam, labels, p_hat) in enumerate(zip(report.lambda_per_iter, report.labels_used_per_iter,
                                                  report.p_hat_per_iter), start=1):
        print(f"  iter {k}: labels={labels} p_hat={p_hat:.4f} lambda={lam:.5g}")
    print(f"support: {np.flatnonzero(report.theta_hat).tolist()}")
    print(f"report: {output}  theta: {theta_path}")
    return 0


def _write_benchmark(report, args, exp, default_name: str) -> Path:
    output = Path(args.output or default_name)
    detail = _sidecar(output, "detail.csv") if exp.detail else None
    with _writing(output):
        write_report_csv(report, output, detail)
    print(f"wrote {len(report.rows)} rows to {output}; failed arms: {report.failures}")
    return output


def cmd_benchmark(args, cfg: config.AppConfig) -> int:
    exp = cfg.experiment_config()
    pipe = cfg.pipeline_config()
    if exp.scaling:
        report = run_rate_scaling(exp, pipe, workers=exp.workers)
        _write_benchmark(report, args, exp, "scaling.csv")
        for method, slope in report.slopes.items():
            print(f"  {method}: log-log slope {slope:.3f}")
        return 0
    report = run_comparison(exp, pipe, workers=exp.workers)
    _write_benchmark(report, args, exp, "benchmark.csv")
    return 0


def cmd_sweep(args, cfg: config.AppConfig) -> int:
    exp = cfg.experiment_config()
    if exp.sweep is None:
        exp = exp.model_copy(update={"sweep": "auto10"})
    report = run_b_sweep(exp, cfg.pipeline_config(), workers=exp.workers)
    _write_benchmark(report, args, exp, "sweep.csv")
    return 0


def cmd_schedule(args, cfg: config.AppConfig) -> int:
    schedule = theory_schedule(cfg.theory.beta, cfg.theory.s, cfg.data.d, cfg.data.n, cfg.pipeline.budget,
                               cfg.theory.c1, cfg.theory.c2, cfg.theory.c3)
    frame = pd.DataFrame([row.model_dump() for row in schedule.rows], columns=["k", "n_k", "delta", "lam", "b_prev"])
    _banner(f"THEORY SCHEDULE  regime={schedule.regime}  beta={schedule.beta:g}  K={schedule.K}")
    print(frame.to_string(index=False))
    if args.output:
        with _writing(args.output):
            frame.to_csv(args.output, index=False, float_format="%.10g")
        print(f"wrote {args.output}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "benchmark": cmd_benchmark,
    "sweep": cmd_sweep,
    "schedule": cmd_schedule,
}


# ============================================================================
# Argument parsing
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("--seed", type=int)
    common.add_argument("--output", "-o")
    common.add_argument("--workers", type=int)
    common.add_argument("--budget", type=float, help="pipeline.budget")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--model", help="data.model")
    data.add_argument("--n", type=int, help="data.n")
    data.add_argument("--d", type=int, help="data.d")
    data.add_argument("--s", type=int, help="data.s (and theory.s)")

    parser = argparse.ArgumentParser(
        prog="cutpoint",
        description="Budgeted active subsampling for individualized linear thresholds.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config keys (file sections or --set):\n" + config.describe_keys(),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common, data], help="write a simulated pool as CSV")

    p_fit = sub.add_parser("fit", parents=[common], help="fit on a dataset CSV")
    p_fit.add_argument("data", help="dataset CSV with header x,z1..zd,y")
    p_fit.add_argument("--k", type=int, help="pipeline.k")
    p_fit.add_argument("--mode", choices=["cv", "theory"], help="pipeline.mode")
    p_fit.add_argument("--loss", choices=["smoothed", "logistic"], help="pipeline.loss")
    p_fit.add_argument("--beta", type=float, help="theory.beta")
    p_fit.add_argument("--s", type=int, help="theory.s")

    p_bench = sub.add_parser("benchmark", parents=[common, data], help="replicated method comparison")
    p_bench.add_argument("--reps", type=int, help="bench.reps")
    p_bench.add_argument("--detail", action="store_true", default=None, help="bench.detail")

    p_sweep = sub.add_parser("sweep", parents=[common, data], help="two-step runs across a b grid")
    p_sweep.add_argument("--b-grid", dest="b_grid", help="'auto10' or comma-separated values")
    p_sweep.add_argument("--reps", type=int, help="bench.reps")
    p_sweep.add_argument("--detail", action="store_true", default=None, help="bench.detail")

    p_sched = sub.add_parser("schedule", parents=[common, data], help="theory tuning schedule")
    p_sched.add_argument("--beta", type=float, help="theory.beta")
    p_sched.add_argument("--c1", type=float)
    p_sched.add_argument("--c2", type=float)
    p_sched.add_argument("--c3", type=float)
    return parser


def _flag_values(args) -> Dict[str, Any]:
    """Dedicated flags as dotted config keys."""
    def get(name: str):
        return getattr(args, name, None)

    extra = {
        "seed": get("seed"),
        "workers": get("workers"),
        "pipeline.budget": get("budget"),
        "pipeline.k": get("k"),
        "pipeline.mode": get("mode"),
        "pipeline.loss": get("loss"),
        "theory.beta": get("beta"),
        "theory.c1": get("c1"),
        "theory.c2": get("c2"),
        "theory.c3": get("c3"),
        "data.model": get("model"),
        "data.n": get("n"),
        "data.d": get("d"),
        "bench.reps": get("reps"),
        "bench.detail": get("detail"),
        "bench.sweep": _parse_grid(get("b_grid")),
    }
    s = get("s")
    if s is not None:
        extra["theory.s"] = s
        if args.command != "fit":
            extra["data.s"] = s
    return extra


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config.load_config(args.config, args.overrides, _flag_values(args))
        log_event("command_started", command=args.command, seed=cfg.seed)
        return COMMANDS[args.command](args, cfg)
    except CutpointError as e:
        log_error(str(e), command=args.command, error_type=type(e).__name__)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
