#!/usr/bin/env python3
"""
Golden Tables - regenerate and compare the reference tables under goldens/

Suites:
- exponents: exact s, s~ and beta over an (n, alpha, q) grid
- measures: atom counts, masses and growth constants of fixed measures
- geometry: shell volumes, cap counts and plate volumes

Directive: directives/goldens.md
"""

import os
import sys
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.artifact_store import _repr_frame, read_golden, write_golden
from tools.cone_geometry import (
    cap_level, cone_shell_volume, knapp_plate, pappus_shell_volume_n2, whitney_cover_pairs,
)
from tools.exponents import INF, beta_bilinear, exponent_table, format_rational
from tools.fractal_measures import (
    estimate_growth_constant, make_cantor, make_delta_product, make_lebesgue_ball,
    make_plate_union_measure, make_radial_power, total_mass,
)
from tools.lab_errors import InvalidInputError
from tools.lab_logging import get_logger

logger = get_logger(__name__)

GOLDEN_SETTINGS = {
    "dimensions": (2, 3, 4),
    "alpha_step": Fraction(1, 4),
    "qs": (Fraction(2), Fraction(3), Fraction(4), Fraction(6), INF),
    "audit_trials": 16,
    "audit_seed": 0,
    "shell_scales": (16.0, 64.0, 256.0),
}


def exponents_table() -> pd.DataFrame:
    frames = []
    for n in GOLDEN_SETTINGS["dimensions"]:
        step = GOLDEN_SETTINGS["alpha_step"]
        alphas = [step * k for k in range(1, int((n + 1) / step) + 1)]
        table = exponent_table(n, alphas, GOLDEN_SETTINGS["qs"])
        table["beta"] = [format_rational(beta_bilinear(Fraction(a), INF if q == "inf" else Fraction(q), n))
                         for a, q in zip(table["alpha"], table["q"])]
        frames.append(table)
    return pd.concat(frames, ignore_index=True)


def measures_table() -> pd.DataFrame:
    builders = [
        ("radial_n2_a3/2", 1.5, lambda: make_radial_power(1.5, 2, 0.125)),
        ("lebesgue_n2", 3.0, lambda: make_lebesgue_ball(2, 0.125)),
        ("delta_n2_a3/2", 1.5, lambda: make_delta_product(1.5, 2, 0.125)),
        ("cantor_n2_a3/2_d4", 1.5, lambda: make_cantor(1.5, 2, 4)),
        ("plate_union_mid_n2_R64", 1.5, lambda: make_plate_union_measure("mid", 1.5, 2, 64.0)),
    ]
    rows = []
    for name, alpha, build in builders:
        mu = build()
        audit = estimate_growth_constant(mu, alpha, trials=GOLDEN_SETTINGS["audit_trials"],
                                         seed=GOLDEN_SETTINGS["audit_seed"])
        rows.append({"measure": name, "alpha": alpha, "atoms": mu.atom_count, "total_mass": total_mass(mu),
                     "growth_constant": audit.estimated_constant})
    return pd.DataFrame(rows)


def geometry_table() -> pd.DataFrame:
    rows = []
    for R in GOLDEN_SETTINGS["shell_scales"]:
        for n in (2, 3):
            decomposition = whitney_cover_pairs(R, n)
            rows.append({
                "quantity": "cone_shell", "n": n, "R": R, "value": cone_shell_volume(R, n),
                "reference": pappus_shell_volume_n2(R) if n == 2 else float("nan"),
                "j0": decomposition.j0, "caps_at_j0": cap_level(decomposition.j0, n).count,
                "plate_volume": knapp_plate(R, n).volume,
            })
    return pd.DataFrame(rows)


SUITES: Dict[str, Callable[[], pd.DataFrame]] = {
    "exponents": exponents_table,
    "measures": measures_table,
    "geometry": geometry_table,
}


def build_suite(suite: str) -> pd.DataFrame:
    if suite not in SUITES:
        raise InvalidInputError(f"unknown golden suite {suite!r}; choose from {sorted(SUITES)}")
    return SUITES[suite]()


def generate_golden(suite: str, root: Optional[str] = None):
    """
    Rebuild one suite and write it under goldens/.

    Args:
        suite: exponents, measures or geometry
        root: Alternative goldens directory

    Returns:
        Path of the golden CSV
    """
    frame = build_suite(suite)
    return write_golden(suite, frame, generator=f"execution/goldens.py::{SUITES[suite].__name__}", root=root)


def compare_golden(suite: str, root: Optional[str] = None) -> List[str]:
    """Rows of the stored golden that the current code no longer reproduces."""
    stored = read_golden(suite, root)
    fresh = _repr_frame(build_suite(suite)).astype(str)
    if list(stored.columns) != list(fresh.columns) or len(stored) != len(fresh):
        return [f"{suite}: shape or columns changed"]
    stored = stored.fillna("nan").astype(str)
    mismatches = []
    for i in range(len(fresh)):
        if not stored.iloc[i].equals(fresh.iloc[i]):
            mismatches.append(f"{suite} row {i}: {stored.iloc[i].to_dict()} != {fresh.iloc[i].to_dict()}")
    return mismatches


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Regenerate or compare golden tables")
    parser.add_argument("suite", choices=sorted(SUITES))
    parser.add_argument("--check", action="store_true")
    parser.add_argument("--root", default=None)
    args = parser.parse_args()

    if args.check:
        problems = compare_golden(args.suite, args.root)
        for line in problems:
            print(line)
        sys.exit(1 if problems else 0)
    print(generate_golden(args.suite, args.root))
