# scripts/smoke_demo.py
"""
Smoke test / demo for Cutpoint.
Simulates one conditional-mean pool, fits passive and two-step estimators on
the same budget and prints their errors.
"""
import os
import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from contracts.models import PipelineConfig
from pipeline import k_step_fit, two_step_cv_fit
from services.active_sampling import SimulationOracle
from services.datagen import generate_pool, make_truth
from services.scoring import estimation_errors, prediction_error


def main(n: int = 6000, d: int = 50, s: int = 5, budget: float = 800.0, seed: int = 11):
    print()
    print("=" * 70)
    print(" " * 26 + "CUTPOINT SMOKE DEMO")
    print("=" * 70)
    print(f"   model=conditional_mean  n={n}  d={d}  s={s}  budget={budget:g}  seed={seed}")
    print()

    truth = make_truth("conditional_mean", d, s, seed)
    pool = generate_pool(truth, n, seed)
    eval_pool = generate_pool(truth, 20000, seed, key="eval")

    arms = {
        "passive_pf": lambda: k_step_fit(pool, SimulationOracle.from_pool(pool, budget),
                                         PipelineConfig(k=1, budget=budget), seed),
        "twostep_pf": lambda: two_step_cv_fit(pool, SimulationOracle.from_pool(pool, budget),
                                              PipelineConfig(k=2, budget=budget), seed),
    }
    for name, run in arms.items():
        print("─" * 70)
        report = run()
        errors = estimation_errors(report.theta_hat, truth.theta_star)
        print(f"{name}: labels={report.labels_total}  lambda={report.lambda_per_iter[-1]:.4g}"
              f"  b_hat={report.b_hat}")
        print(f"   l1={errors['l1']:.3f}  l2={errors['l2']:.3f}  linf={errors['linf']:.3f}"
              f"  pred_err={prediction_error(report.theta_hat, eval_pool):.4f}")
    print()
    print("=" * 70)
    print(" " * 25 + "SMOKE DEMO COMPLETE")
    print("=" * 70)


if __name__ == "__main__":
    main()
