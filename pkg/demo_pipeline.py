#!/usr/bin/env python3
"""
Cone Fractal Lab - Quick Tour
Walks through the exact exponents, a measure audit and a few fast experiments
so a fresh checkout can be sanity-checked in well under a minute.
"""

import sys
import os
import json
from datetime import datetime
from fractions import Fraction

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from tools.exponents import INF, exponent_table
from tools.fractal_measures import estimate_growth_constant, make_cantor, measure_summary
from execution.experiments import run_experiment

TOUR = [
    ("beta_recursion", {"count": 20}),
    ("oracle", {"family": "box", "points": 10}),
    ("pushforward", {}),
    ("knapp", {"R_ladder": "5:7"}),
]


def print_header(title):
    """Print a formatted section header."""
    print("\n" + "=" * 80)
    print(f"  {title}")
    print("=" * 80 + "\n")


def display_report(report):
    """One block per experiment: verdict, slope and the checks that ran."""
    print(f"{report.experiment} - {report.verdict}")
    print("-" * 80)
    if report.fit is not None:
        fit = report.fit
        bracket = f"[{fit.lower}, {fit.upper}]"
        print(f"  slope {fit.slope:+.4f} +/- {fit.stderr:.4f} against {bracket} over {fit.variable}")
    for entry in report.checks:
        mark = "[+]" if entry["passed"] else "[-]"
        print(f"  {mark} {entry['name']:30s} {entry['value']} (limit {entry['limit']})")
    print()


def run_demo(n=2, seed=0, json_output=False):
    """
    Run the tour.

    Args:
        n: Spatial dimension for the exponent table
        seed: Seed handed to every experiment
        json_output: Print one JSON document instead of the human-readable tour
    """
    start_time = datetime.now()

    alphas = [Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2), Fraction(5, 2)]
    table = exponent_table(n, alphas, [Fraction(2), Fraction(4), INF])
    if not json_output:
        print_header(f"STEP 1: EXACT EXPONENTS (n={n})")
        print(table.to_string(index=False))

    mu = make_cantor(1.5, 2, 5)
    audit = estimate_growth_constant(mu, trials=32, seed=seed)
    if not json_output:
        print_header("STEP 2: MEASURE AUDIT")
        print(json.dumps(measure_summary(mu), indent=2, default=str))
        print(f"\nEstimated growth constant: {audit.estimated_constant:.4f}"
              f" (diverging trend: {audit.diverging_trend})")

    if not json_output:
        print_header("STEP 3: FAST EXPERIMENTS")
    reports = []
    for name, params in TOUR:
        report = run_experiment(name, params, seed=seed)
        reports.append(report)
        if not json_output:
            display_report(report)

    duration = (datetime.now() - start_time).total_seconds()
    if json_output:
        output = {
            "success": all(r.passed for r in reports),
            "data": {
                "exponents": table.to_dict(orient="records"),
                "audit": audit.as_row(),
                "reports": [r.to_payload() for r in reports],
            },
            "metadata": {"execution_time_ms": int(duration * 1000), "seed": seed},
        }
        print(json.dumps(output, indent=2, default=str))
    else:
        print_header("TOUR SUMMARY")
        print(f"Total execution time: {duration:.2f} seconds")
        print(f"Experiments passed: {sum(r.passed for r in reports)}/{len(reports)}")
        print("\n" + "=" * 80 + "\n")
    return all(r.passed for r in reports)


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Cone Fractal Lab quick tour")
    parser.add_argument("--n", type=int, default=2, help="Spatial dimension for the exponent table")
    parser.add_argument("--seed", type=int, default=0, help="Seed for every experiment")
    parser.add_argument("--json", action="store_true", help="Output JSON instead of human-readable format")
    args = parser.parse_args()

    try:
        ok = run_demo(n=args.n, seed=args.seed, json_output=args.json)
    except KeyboardInterrupt:
        print("\n\nTour interrupted by user")
        sys.exit(0)
    sys.exit(0 if ok else 1)
