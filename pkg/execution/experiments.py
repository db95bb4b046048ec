#!/usr/bin/env python3
"""
Experiments - scale-ladder harness for the fractal Strichartz lab

Each experiment builds a measure and a family of test functions, measures a
norm ratio along a ladder of scales, fits the log-log slope and records the
checks it made. Reports are deterministic for identical parameters and seed;
wall-clock runtime goes to a separate file.

Directive: directives/scaling_experiments.md
"""

import os
import sys
import math
import time
import inspect
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dotenv import load_dotenv
from scipy import stats

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.artifact_store import artifact_path, write_field, write_json, write_ladder
from tools.cone_geometry import (
    ball_volume, cap_level, cone_shell_volume, export_caps, knapp_plate, plate_in_shell,
    transversal_pair_supports, whitney_caps, whitney_cover_pairs, angular_project,
)
from tools.exponents import (
    INF, Example, ExponentQuery, Regime, as_rational, beta_bilinear, beta_recursion,
    beta_recursion_grid, beta_recursion_limit, beta_recursion_steps, decay_exponent_bound,
    format_rational, inverse_q, parse_q, predicted_example_slope, pushforward_growth_exponent,
    s_necessary, s_sufficient,
)
from tools.fourier_engine import (
    Family, SpatialField, annulus_data, as_exponent, average_cone_decay, box_factor_values,
    box_indicator, calibrate_knapp_radius, cone_shell_ft_oracle, cone_shell_indicator,
    ft_at_points, ft_grid_converged, half_wave_evolve, l2_norm_freq, lattice_sum,
    littlewood_paley, low_part, lp_top_band, lq_norm_mu, mollify_convolve, plate_indicator,
    random_cone_function, reflect_first_axis, sample_half_wave_at, sample_wave_at,
    separable_lq_norm, sobolev_norm, spectral_data, spectral_grid, to_spatial, windowed_plate,
)
from tools.fractal_measures import (
    AUDIT_SETTINGS, GrowthAudit, LatticeKind, anisotropic_pushforward, estimate_growth_constant, lattice_plan,
    make_cantor, make_delta_product, make_lebesgue_ball, make_null_product,
    make_plate_union_measure, make_radial_power, make_squashed_measure, measure_summary,
    restrict_rescale, total_mass,
)
from tools.lab_errors import (
    InvalidInputError, QuadratureNotConvergedError, RegimeMismatchError, ResourceInfeasibleError,
)
from tools.lab_logging import get_logger
from tools.wavepackets import (
    bilinear_local, decompose, packet_dictionary, random_slab_data, reconstruction_error,
    split_energy, support_inflation, tube_decay_check,
)
from execution.slope_fit import SlopeFit, fit_ladder, growth_slope, parse_ladder

load_dotenv()

logger = get_logger(__name__)

# Pass/fail thresholds shared by the experiment families
EXPERIMENT_SETTINGS = {
    "oracle_tolerance": 1e-6,
    "separability_tolerance": 1e-8,
    "partition_tolerance": 1e-9,
    "growth_variation": 2.0,
    "packet_reconstruction": 1e-3,
    "packet_coefficient_ratio": 10.0,
    "packet_support_inflation": 4.0,
    "packet_epsilon": 0.2,
    "packet_bilinear_slack": 0.25,
    "wave_conservation": 1e-10,
    "wave_reversal": 1e-9,
    "wave_bounded_slope": 0.15,
    "recursion_tolerance": Fraction(1, 10 ** 9),
    "recursion_max_steps": 200,
    # default R ladders where the desk-scale asymptotics kick in late
    "plate_ladders": {Regime.LOW: "4:7", Regime.MID: "4:7", Regime.HIGH: "8:11"},
    "lattice_ladders": {LatticeKind.MID_LATTICE: "5:9", LatticeKind.HIGH_LATTICE: "4:7"},
    "linear_ladders": {"random": "3:6"},
    "linear_ladder": "5:8",
}


# --- reports ---------------------------------------------------------------------

def canonical_value(value):
    """Render parameters the way reports store them: rationals as text, INF as "inf"."""
    if value is INF:
        return "inf"
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return [canonical_value(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [canonical_value(v) for v in value]
    if isinstance(value, dict):
        return {str(k): canonical_value(v) for k, v in value.items()}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


@dataclass
class ExperimentReport:
    """Outcome of one experiment run."""

    experiment: str
    params: Dict
    fit: Optional[SlopeFit] = None
    checks: List[Dict] = field(default_factory=list)
    convergence: Dict = field(default_factory=dict)
    extras: Dict = field(default_factory=dict)
    series: Dict[str, Tuple[List[float], List[float], str]] = field(default_factory=dict)
    exports: Dict[str, object] = field(default_factory=dict)
    fields: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    seed: Optional[int] = None
    runtime: float = 0.0
    config: Dict = field(default_factory=dict)

    def check(self, name: str, value, limit, passed: bool) -> bool:
        self.checks.append({"name": name, "value": canonical_value(value),
                            "limit": canonical_value(limit), "passed": bool(passed)})
        if not passed:
            logger.warning("check_failed", experiment=self.experiment, check=name, value=canonical_value(value),
                           limit=canonical_value(limit))
        return bool(passed)

    def check_named(self, name: str) -> Optional[Dict]:
        for entry in self.checks:
            if entry["name"] == name:
                return entry
        return None

    @property
    def passed(self) -> bool:
        fit_ok = self.fit is None or self.fit.consistent
        converged = all(entry.get("passed", True) for entry in self.convergence.values())
        return fit_ok and converged and all(entry["passed"] for entry in self.checks)

    @property
    def verdict(self) -> str:
        if self.fit is not None and not self.fit.consistent:
            return self.fit.verdict.value
        return "CONSISTENT" if self.passed else "CHECK_FAILED"

    def failures(self) -> List[Dict]:
        """Entries for failures.json."""
        out = []
        if self.fit is not None and not self.fit.consistent:
            out.append({"experiment": self.experiment, "kind": "verdict", "name": self.fit.verdict.value,
                        "slope": self.fit.slope, "stderr": self.fit.stderr,
                        "lower": self.fit.lower, "upper": self.fit.upper})
        for entry in self.checks:
            if not entry["passed"]:
                out.append(dict(entry, experiment=self.experiment, kind="check"))
        for name, entry in self.convergence.items():
            if not entry.get("passed", True):
                out.append(dict(entry, experiment=self.experiment, kind="convergence", name=name))
        return out

    def to_payload(self) -> Dict:
        return {
            "experiment": self.experiment,
            "params": canonical_value(self.params),
            "config": canonical_value(self.config),
            "seed": self.seed,
            "fit": None if self.fit is None else self.fit.as_dict(),
            "checks": self.checks,
            "convergence": canonical_value(self.convergence),
            "extras": canonical_value(self.extras),
            "passed": self.passed,
            "verdict": self.verdict,
        }

    def write(self, out: Optional[str] = None) -> Dict[str, Path]:
        """Ladder tables, JSON exports, spatial fields, the report JSON and the runtime record."""
        paths = {}
        stem = self.experiment
        if self.fit is not None:
            ladder = write_ladder(out, f"{stem}_ladder", self.fit.scales, self.fit.ratios, self.fit.variable)
            paths["ladder_csv"], paths["ladder_plot"] = ladder["csv"], ladder["plot"]
        for name, (scales, ratios, variable) in sorted(self.series.items()):
            ladder = write_ladder(out, f"{stem}_{name}", scales, ratios, variable)
            paths[f"{name}_csv"], paths[f"{name}_plot"] = ladder["csv"], ladder["plot"]
        for name, payload in sorted(self.exports.items()):
            paths[name] = write_json(artifact_path(out, f"{stem}_{name}", ".json"), canonical_value(payload))
        for name, (points, values) in sorted(self.fields.items()):
            paths[name] = write_field(out, f"{stem}_{name}", points, values)
        paths["report"] = write_json(artifact_path(out, f"{stem}_report", ".json"), self.to_payload())
        paths["runtime"] = write_json(artifact_path(out, f"{stem}_runtime", ".json"),
                                      {"experiment": stem, "runtime_seconds": round(self.runtime, 3)})
        logger.info("report_written", experiment=stem, verdict=self.verdict, path=str(paths["report"]))
        return paths


# --- ladder runner -------------------------------------------------------------------

def run_ladder(scales: Sequence[float], point: Callable[[float], Tuple[float, Dict]],
               jobs: int = 1, experiment: str = "") -> Tuple[List[float], List[Dict]]:
    """
    Evaluate point(scale) over a ladder, in parallel across scales.

    Args:
        scales: Ladder scales
        point: Returns (ratio, info) for one scale
        jobs: Worker threads; results keep ladder order
        experiment: Name used in log events

    Returns:
        (ratios, infos) in ladder order
    """
    scales = [float(s) for s in scales]

    def measured(scale):
        started = time.perf_counter()
        ratio, info = point(scale)
        logger.info("ladder_point", experiment=experiment, scale=scale, ratio=float(ratio),
                    seconds=round(time.perf_counter() - started, 3))
        return float(ratio), dict(info, scale=scale, ratio=float(ratio))

    workers = max(1, min(int(jobs), len(scales)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(measured, scales))
    else:
        results = [measured(s) for s in scales]
    return [r for r, _ in results], [info for _, info in results]


def _scales(ladder) -> List[float]:
    return [float(s) for s in parse_ladder(ladder)]


def _half_exponent(q) -> float:
    return as_exponent(q) / 2.0


def linear_ratio(f, mu, q, jobs: int = 1) -> float:
    """
    ||f^||_{L^q(mu)} / ||f||_2, separably when f is a box in the measure's factor frame.

    Args:
        f: Frequency function
        mu: Measure (materialized, or a product measure aligned with f)
        q: Exponent
        jobs: Worker threads for the point evaluation

    Returns:
        Ratio
    """
    factors = mu.factors
    if (factors is not None and f.family in (Family.BOX, Family.WINDOWED_BOX)
            and np.allclose(factors.basis, f.params["rotation"])):
        numerator = separable_lq_norm(box_factor_values(f, factors), factors, q)
    else:
        if not mu.materialized:
            raise InvalidInputError(f"{mu.label} is not materialized and not aligned with the {f.family.value} frame")
        if mu.axisymmetric and f.family is not Family.CONE_SHELL:
            raise InvalidInputError("meridian measures only pair with axisymmetric functions")
        numerator = lq_norm_mu(ft_at_points(f, mu.points, jobs=jobs), mu, q)
    return numerator / l2_norm_freq(f)


# --- linear lower bounds -------------------------------------------------------------

def knapp_cone_experiment(n: int = 2, alpha=Fraction(3, 2), q=Fraction(2), R_ladder="5:9",
                          resolution: float = None, tolerance: float = 0.1, oracle_points: int = 2,
                          jobs: int = 1) -> ExperimentReport:
    """
    Shell indicators of Gamma_R(1) against the radial measure |x|^{alpha-n-1}.

    Args:
        n: Spatial dimension
        alpha: Dimension of the radial measure
        q: Exponent
        R_ladder: Scales (powers of 2)
        resolution: Radial resolution (1/max R by default)
        tolerance: Verdict slack
        oracle_points: Atoms compared against the nested-quadrature shell transform at the smallest R
        jobs: Worker threads across the ladder

    Returns:
        ExperimentReport with the slope compared to n/2 - alpha/q
    """
    query = ExponentQuery(alpha, q, n)
    scales = _scales(R_ladder)
    resolution = min(0.125, 1.0 / max(scales)) if resolution is None else float(resolution)
    if resolution * max(scales) > 1.0 + 1e-12:
        raise ResourceInfeasibleError(f"radial resolution {resolution} does not resolve 1/R at R={max(scales)}")
    mu = make_radial_power(float(query.alpha), n, resolution, layout="meridian")

    def point(R):
        f = cone_shell_indicator(R, n)
        field_ = ft_at_points(f, mu.points, label=f"shell_R{int(R)}")
        return lq_norm_mu(field_, mu, query.q) / l2_norm_freq(f), {"l2": l2_norm_freq(f)}

    ratios, infos = run_ladder(scales, point, jobs, "knapp")
    predicted = predicted_example_slope(Example.KNAPP_CONE, query.alpha, query.q, n)
    upper = s_sufficient(query).value
    report = ExperimentReport("knapp", {"n": n, "alpha": query.alpha, "q": query.q, "R_ladder": scales,
                                        "resolution": resolution})
    report.fit = fit_ladder(scales, ratios, predicted=predicted, lower=float(predicted),
                            upper=float(max(predicted, upper)), tolerance=tolerance,
                            notes={"example": Example.KNAPP_CONE.value, "s_sufficient": format_rational(upper)})

    if oracle_points > 0:
        R0 = scales[0]
        picks = np.unique(np.linspace(0, len(mu.points) - 1, oracle_points).astype(int))
        values = ft_at_points(cone_shell_indicator(R0, n), mu.points[picks]).values
        exact = np.array([cone_shell_ft_oracle(R0, n, x) for x in mu.points[picks]])
        error = float(np.max(np.abs(values - exact))) / cone_shell_volume(R0, n)
        report.convergence["shell_quadrature"] = {
            "R": R0, "points": len(picks), "relative_error": error,
            "limit": EXPERIMENT_SETTINGS["oracle_tolerance"],
            "passed": error <= EXPERIMENT_SETTINGS["oracle_tolerance"],
        }
    try:
        report.extras["knapp_c"] = calibrate_knapp_radius(scales[0], n)
    except QuadratureNotConvergedError as e:
        logger.warning("knapp_calibration_failed", R=scales[0], error=str(e))
        report.extras["knapp_c"] = None
    report.extras["measure"] = measure_summary(mu)
    report.extras["points"] = infos
    return report


def plate_experiment(n: int = 3, alpha=Fraction(2), q=Fraction(2), R_ladder=None, window: str = "indicator",
                     regime: str = None, resolution: float = None, tolerance: float = 0.1,
                     jobs: int = 1) -> ExperimentReport:
    """
    Knapp plates against the delta-product measure in the plate frame.

    The plate transform factorizes along the measure's factor axes, so the
    L^q norm is a product of 1-D norms and the measure is never expanded.
    Without R_ladder the regime picks the ladder: the transverse factors of
    the HIGH plate only reach their R^{1/4} growth from R = 2^8 on.
    """
    query = ExponentQuery(alpha, q, n)
    if regime is not None:
        try:
            wanted = Regime[str(regime).upper()]
        except KeyError:
            raise InvalidInputError(f"unknown regime {regime!r}")
        if wanted is not query.regime:
            raise RegimeMismatchError(f"alpha={query.alpha} is {query.regime.value}, not {wanted.value}")
    if window not in ("indicator", "windowed"):
        raise InvalidInputError(f"window must be 'indicator' or 'windowed', got {window!r}")
    scales = _scales(EXPERIMENT_SETTINGS["plate_ladders"][query.regime] if R_ladder is None else R_ladder)
    resolution = 1.0 / (4.0 * max(scales)) if resolution is None else float(resolution)
    mu = make_delta_product(float(query.alpha), n, resolution, domain="cube")
    build = plate_indicator if window == "indicator" else windowed_plate
    report = ExperimentReport("plate", {"n": n, "alpha": query.alpha, "q": query.q, "R_ladder": scales,
                                        "window": window, "resolution": resolution})

    contained = []

    def point(R):
        plate = knapp_plate(R, n)
        contained.append((R, plate_in_shell(plate)))
        f = build(plate)
        return linear_ratio(f, mu, query.q), {"plate_volume": plate.volume}

    ratios, infos = run_ladder(scales, point, jobs, "plate")
    predicted = predicted_example_slope(Example.PLATE, query.alpha, query.q, n)
    report.fit = fit_ladder(scales, ratios, predicted=predicted, tolerance=tolerance,
                            notes={"example": Example.PLATE.value, "regime": query.regime.value})
    report.check("plate_in_shell", [bool(ok) for _, ok in sorted(contained)], True,
                 all(ok for _, ok in contained))
    report.extras["measure"] = measure_summary(mu)
    report.extras["points"] = infos
    return report


def lattice_experiment(kind: str = "mid", n: int = 2, alpha=Fraction(3, 2), q=Fraction(2), R_ladder=None,
                       cells_per_axis: int = None, tolerance: float = 0.1, upper_tolerance: float = 0.15,
                       jobs: int = 1) -> ExperimentReport:
    """Modulated plate sums against the union of their translated dual plates."""
    kind = LatticeKind.parse(kind)
    query = ExponentQuery(alpha, q, n)
    example = Example.LATTICE_MID if kind is LatticeKind.MID_LATTICE else Example.LATTICE_HIGH
    predicted = predicted_example_slope(example, query.alpha, query.q, n)
    scales = _scales(EXPERIMENT_SETTINGS["lattice_ladders"][kind] if R_ladder is None else R_ladder)

    def point(R):
        mu = make_plate_union_measure(kind, float(query.alpha), n, R, cells_per_axis)
        plan = mu.meta["plan"]
        F = lattice_sum(plan)
        ratio = lq_norm_mu(ft_at_points(F, mu.points), mu, query.q) / l2_norm_freq(F)
        return ratio, {"boxes": plan.count, "atoms": mu.atom_count, "density": plan.density}

    ratios, infos = run_ladder(scales, point, jobs, "lattice")
    upper = s_sufficient(query).value
    report = ExperimentReport("lattice", {"kind": kind, "n": n, "alpha": query.alpha, "q": query.q,
                                          "R_ladder": scales, "cells_per_axis": cells_per_axis})
    report.fit = fit_ladder(scales, ratios, predicted=predicted, lower=float(predicted),
                            upper=float(max(upper, predicted)), tolerance=tolerance,
                            upper_tolerance=upper_tolerance,
                            notes={"example": example.value, "s_sufficient": format_rational(upper)})
    report.extras["points"] = infos
    return report


# --- linear upper bounds ----------------------------------------------------------

LINEAR_FAMILIES = {
    "knapp": ("radial", "cantor"),
    "plate": ("delta", "cantor"),
    "lattice_mid": ("plate_union",),
    "lattice_high": ("plate_union",),
    "random": ("cantor", "radial_grid"),
}


def linear_upper_experiment(family: str = "knapp", measure: str = None, n: int = 2, alpha=Fraction(3, 2),
                            q=Fraction(2), R_ladder=None, bracket: str = "upper", depth: int = 5,
                            seed: int = 0, tolerance: float = 0.15, jobs: int = 1) -> ExperimentReport:
    """
    Any admissible family against any admissible measure stays below s~.

    Args:
        family: knapp, plate, lattice_mid, lattice_high or random
        measure: Measure family paired with it (first admissible one by default)
        n: Spatial dimension
        alpha: Dimension
        q: Exponent
        R_ladder: Scales (3:6 for random, whose cone grid outgrows memory at R = 128; 5:8 otherwise)
        bracket: "upper" checks slope <= s~, "sharp" also checks slope >= s
        depth: Cantor depth
        seed: Seed for random functions
        tolerance: Verdict slack
        jobs: Worker threads

    Returns:
        ExperimentReport
    """
    if family not in LINEAR_FAMILIES:
        raise InvalidInputError(f"unknown family {family!r}; choose from {sorted(LINEAR_FAMILIES)}")
    measure = measure or LINEAR_FAMILIES[family][0]
    if measure not in LINEAR_FAMILIES[family]:
        raise InvalidInputError(f"{family} pairs with {LINEAR_FAMILIES[family]}, not {measure!r}")
    if bracket not in ("upper", "sharp"):
        raise InvalidInputError(f"bracket must be 'upper' or 'sharp', got {bracket!r}")
    query = ExponentQuery(alpha, q, n)
    a = float(query.alpha)
    if R_ladder is None:
        R_ladder = EXPERIMENT_SETTINGS["linear_ladders"].get(family, EXPERIMENT_SETTINGS["linear_ladder"])
    scales = _scales(R_ladder)
    fixed = None
    if measure == "radial":
        fixed = make_radial_power(a, n, min(0.125, 1.0 / max(scales)), layout="meridian")
    elif measure == "radial_grid":
        fixed = make_radial_power(a, n, 0.125)
    elif measure == "delta":
        fixed = make_delta_product(a, n, 1.0 / (4.0 * max(scales)), domain="cube")
    elif measure == "cantor":
        fixed = make_cantor(a, n, depth)

    def build(R):
        if family == "knapp":
            return cone_shell_indicator(R, n)
        if family == "plate":
            return plate_indicator(knapp_plate(R, n))
        if family == "random":
            return random_cone_function(R, n, 0.5, seed=seed)
        return None

    def point(R):
        if measure == "plate_union":
            kind = "mid" if family == "lattice_mid" else "high"
            mu = make_plate_union_measure(kind, a, n, R)
            f = lattice_sum(mu.meta["plan"])
        else:
            mu, f = fixed, build(R)
        return linear_ratio(f, mu, query.q), {"measure": mu.label}

    ratios, infos = run_ladder(scales, point, jobs, "linear_upper")
    upper = s_sufficient(query).value
    lower = s_necessary(query).value if bracket == "sharp" else None
    report = ExperimentReport("linear_upper", {"family": family, "measure": measure, "n": n, "alpha": query.alpha,
                                               "q": query.q, "R_ladder": scales, "bracket": bracket,
                                               "depth": depth}, seed=seed)
    report.fit = fit_ladder(scales, ratios, lower=None if lower is None else float(lower), upper=float(upper),
                            tolerance=tolerance, two_sided=False,
                            notes={"s_sufficient": format_rational(upper),
                                   "s_necessary": format_rational(s_necessary(query).value)})
    report.extras["points"] = infos
    return report


# --- bilinear -------------------------------------------------------------------------

def _pair_product(f, g, points) -> np.ndarray:
    return ft_at_points(f, points).values * ft_at_points(g, points).values


def separable_pair_norm(f, g, factors, q) -> float:
    """
    ||f^ g^||_{L^{q/2}} against a product measure on which f^ g^ factorizes.

    The product is sampled along each factor axis through the origin and
    normalized by its value at 0; a random probe of product atoms confirms
    the factorization before it is used.
    """
    d = factors.dim
    origin = np.zeros((1, d))
    center = complex(_pair_product(f, g, origin)[0])
    if abs(center) == 0:
        raise InvalidInputError("pair product vanishes at the origin")
    lines = [_pair_product(f, g, np.outer(nodes, factors.basis[:, a])) / center
             for a, nodes in enumerate(factors.nodes)]

    rng = np.random.default_rng(0)
    picks = [rng.integers(len(nodes), size=16) for nodes in factors.nodes]
    t = np.stack([factors.nodes[a][picks[a]] for a in range(d)], axis=1)
    direct = _pair_product(f, g, t @ factors.basis.T)
    product = center * np.prod(np.stack([lines[a][picks[a]] for a in range(d)], axis=1), axis=1)
    defect = float(np.max(np.abs(direct - product)))
    if defect > EXPERIMENT_SETTINGS["separability_tolerance"] * abs(center):
        raise InvalidInputError(f"pair product does not factorize in the measure frame (defect {defect:.3g})")
    return abs(center) * separable_lq_norm(lines, factors, _half_exponent(q))


def squashed_cap(R: float, n: int, sign: float = 1.0):
    """Box of sides 1/2 x sqrt(R)/2 x ... x 1/2 around (sign 3R/2, 0, ..., 3R/2)."""
    center = np.zeros(n + 1)
    center[0], center[n] = sign * 1.5 * R, 1.5 * R
    half = np.full(n + 1, 0.25)
    half[1:n] = 0.25 * math.sqrt(R)
    return box_indicator(center, half, np.eye(n + 1))


def bilinear_experiment(n: int = 2, alpha=Fraction(2), q=Fraction(2), R_ladder="5:8", variant: str = "transversal",
                        window: str = "windowed", resolution: float = None, tolerance: float = 0.2,
                        jobs: int = 1) -> ExperimentReport:
    """
    ||f^ g^||_{L^{q/2}(mu)} / (||f|| ||g||) for transversal pairs on Gamma_R(1).

    The transversal variant mirrors a Knapp plate through xi_1 -> -xi_1 and
    measures against a delta product in the ambient frame; the squashed
    variant uses flat caps against a measure concentrated near a 2-plane.
    """
    query = ExponentQuery(alpha, q, n)
    beta = beta_bilinear(query.alpha, query.q, n)
    scales = _scales(R_ladder)
    half_q = _half_exponent(query.q)
    report = ExperimentReport("bilinear", {"n": n, "alpha": query.alpha, "q": query.q, "R_ladder": scales,
                                           "variant": variant, "window": window})
    if variant == "transversal":
        if query.alpha > n:
            raise RegimeMismatchError(f"transversal bilinear ladder needs alpha <= n, got alpha={query.alpha}")
        resolution = 1.0 / (2.0 * max(scales)) if resolution is None else float(resolution)
        mu = make_delta_product(float(query.alpha), n, resolution, domain="cube", basis=np.eye(n + 1))
        build = windowed_plate if window == "windowed" else plate_indicator
        mass = total_mass(mu)
        inside = []

        def point(R):
            plate = knapp_plate(R, n)
            f = build(plate)
            g = reflect_first_axis(f)
            sector_f, sector_g = transversal_pair_supports(R, n)
            sample = plate.sample(256, np.random.default_rng(int(R)))
            mirrored = sample * np.concatenate([[-1.0], np.ones(n)])
            inside.append(bool(np.all(sector_f.contains(sample)) and np.all(sector_g.contains(mirrored))))
            ratio = separable_pair_norm(f, g, mu.factors, query.q) / (l2_norm_freq(f) * l2_norm_freq(g))
            trivial = R ** n * mass ** (0.0 if math.isinf(half_q) else 1.0 / half_q)
            return ratio, {"trivial_bound": trivial}

        ratios, infos = run_ladder(scales, point, jobs, "bilinear")
        report.fit = fit_ladder(scales, ratios, upper=float(2 * beta), tolerance=tolerance, two_sided=False,
                                notes={"beta": format_rational(beta)})
        report.check("supports_transversal", inside, True, all(inside))
        report.check("trivial_bound", max(r / i["trivial_bound"] for r, i in zip(ratios, infos)), 1.0,
                     all(r <= i["trivial_bound"] * (1 + 1e-9) for r, i in zip(ratios, infos)))
    elif variant == "squashed":
        resolution = 1.0 / (4.0 * math.sqrt(max(scales))) if resolution is None else float(resolution)
        mu = make_squashed_measure(float(query.alpha), n, resolution)

        def point(R):
            f, g = squashed_cap(R, n, 1.0), squashed_cap(R, n, -1.0)
            if mu.factors is not None:
                fv, gv = box_factor_values(f, mu.factors), box_factor_values(g, mu.factors)
                numerator = separable_lq_norm([a * b for a, b in zip(fv, gv)], mu.factors, half_q)
            else:
                numerator = lq_norm_mu(SpatialField(mu.points, _pair_product(f, g, mu.points)), mu, half_q)
            return numerator / (l2_norm_freq(f) * l2_norm_freq(g)), {}

        ratios, infos = run_ladder(scales, point, jobs, "bilinear_squashed")
        lower = 2 * (Fraction(n - 1, 4) - (query.alpha - 2) * inverse_q(query.q) / 2)
        report.fit = fit_ladder(scales, ratios, lower=float(lower), upper=float(max(2 * beta, lower)),
                                tolerance=tolerance, notes={"beta": format_rational(beta),
                                                            "squashed_lower": format_rational(lower)})
    else:
        raise InvalidInputError(f"unknown bilinear variant {variant!r}")
    report.extras["measure"] = measure_summary(mu)
    report.extras["points"] = infos
    return report


def localization_experiment(n: int = 2, alpha=Fraction(2), q=INF, beta=None, rho_ladder="-5:-1", R: float = 16.0,
                            resolution: float = 1.0 / 32.0, x0=None, tolerance: float = 0.25,
                            jobs: int = 1) -> ExperimentReport:
    """
    Restricted norms over B(x0, rho) for a fixed transversal pair.

    A bilinear bound with exponent beta applied to the rescaled measure
    forces the localized ratio to decay no faster than rho^e with
    e = 2alpha/q + 2beta - n, so the fit is one-sided from below.
    """
    query = ExponentQuery(alpha, q, n)
    beta = beta_bilinear(query.alpha, query.q, n) if beta is None else as_rational(beta)
    scales = _scales(rho_ladder)
    if max(scales) > 1:
        raise InvalidInputError("rho ladder must stay in (0, 1]")
    mu = make_radial_power(float(query.alpha), n, resolution)
    x0 = np.zeros(n + 1) if x0 is None else np.asarray(x0, dtype=float)
    plate = knapp_plate(R, n)
    f = windowed_plate(plate)
    g = reflect_first_axis(f)
    values = _pair_product(f, g, mu.points)
    norms = l2_norm_freq(f) * l2_norm_freq(g)
    half_q = _half_exponent(query.q)
    a = float(query.alpha)

    def localized(rho):
        local = restrict_rescale(mu, x0, rho)
        if local.empty:
            raise InvalidInputError(f"B(x0, {rho}) holds no atoms")
        inside = np.linalg.norm(mu.points - x0, axis=1) <= rho
        magnitude = np.abs(values[inside])
        if math.isinf(half_q):
            numerator = float(np.max(magnitude))
        else:
            numerator = float(np.sum(rho ** a * local.weights * magnitude ** half_q)) ** (1.0 / half_q)
        return numerator / norms, {"atoms": local.atom_count}

    ratios, infos = run_ladder(scales, localized, 1, "localization")
    exponent = 2 * query.alpha * inverse_q(query.q) + 2 * beta - n
    report = ExperimentReport("localization", {"n": n, "alpha": query.alpha, "q": query.q, "beta": beta,
                                               "rho_ladder": scales, "R": R, "resolution": resolution,
                                               "x0": x0})
    report.fit = fit_ladder(scales, ratios, lower=float(exponent), tolerance=tolerance, variable="rho",
                            two_sided=False, notes={"rescaling_exponent": format_rational(exponent)})
    if not np.any(x0):
        whole = lq_norm_mu(SpatialField(mu.points, values), mu, half_q) / norms
        unit = localized(1.0)[0]
        report.check("unit_radius_matches_unlocalized", abs(unit - whole) / whole, 1e-12,
                     abs(unit - whole) <= 1e-12 * whole)
    report.extras["points"] = infos
    return report


# --- convolution, decay and pushforward --------------------------------------------------

def convolution_experiment(n: int = 3, alpha=Fraction(2), r_norm=INF, R_ladder="4:8", measure: str = "radial",
                           resolution: float = None, tolerance: float = 0.1, jobs: int = 1) -> ExperimentReport:
    """||phi_R * mu||_{L^r} with the Gaussian mollifier, predicted (n+1-alpha)(1-1/r)."""
    query = ExponentQuery(alpha, 2, n)
    r_norm = parse_q(r_norm)
    if r_norm is not INF and r_norm not in (1, 2):
        raise InvalidInputError(f"r must be 1, 2 or inf, got {format_rational(r_norm)}")
    scales = _scales(R_ladder)
    resolution = 1.0 / (4.0 * max(scales)) if resolution is None else float(resolution)
    if measure == "radial":
        mu = make_radial_power(float(query.alpha), n, min(0.125, resolution), layout="meridian")
    elif measure == "plane":
        mu = make_delta_product(float(query.alpha), n, resolution, domain="cube")
    else:
        raise InvalidInputError(f"convolution measure must be 'radial' or 'plane', got {measure!r}")
    r = as_exponent(r_norm)

    def point(R):
        return mollify_convolve(mu, R, r), {}

    ratios, _ = run_ladder(scales, point, jobs, "convolution")
    predicted = (n + 1 - query.alpha) * (1 - inverse_q(r_norm))
    report = ExperimentReport("convolution", {"n": n, "alpha": query.alpha, "r_norm": r_norm, "R_ladder": scales,
                                              "measure": measure, "resolution": resolution})
    report.fit = fit_ladder(scales, ratios, predicted=predicted, tolerance=tolerance)
    report.extras["measure"] = measure_summary(mu)
    return report


def average_decay_experiment(n: int = 3, alpha=None, measure: str = "lebesgue", R_ladder="3:7",
                             resolution: float = 0.125, depth: int = 5, tolerance: float = 0.15,
                             jobs: int = 1) -> ExperimentReport:
    """Cone-surface average of |mu^(R xi)|^2 stays below R^{-n + 2 s(alpha, 2, n)}."""
    alpha = Fraction(n + 1) if alpha is None else as_rational(alpha)
    ExponentQuery(alpha, 2, n)
    if measure == "lebesgue":
        if alpha != n + 1:
            raise InvalidInputError(f"Lebesgue measure has alpha = {n + 1}, got {alpha}")
        mu = make_lebesgue_ball(n, resolution, layout="meridian")
    elif measure == "radial":
        mu = make_radial_power(float(alpha), n, resolution, layout="meridian")
    elif measure == "cantor":
        mu = make_cantor(float(alpha), n, depth)
    else:
        raise InvalidInputError(f"unknown decay measure {measure!r}")
    scales = _scales(R_ladder)

    def point(R):
        return average_cone_decay(mu, R), {}

    ratios, _ = run_ladder(scales, point, jobs, "average_decay")
    bound = decay_exponent_bound(alpha, n)
    report = ExperimentReport("average_decay", {"n": n, "alpha": alpha, "measure": measure, "R_ladder": scales,
                                                "resolution": resolution})
    report.fit = fit_ladder(scales, ratios, upper=float(bound), tolerance=tolerance, two_sided=False,
                            notes={"decay_bound": format_rational(bound)})
    report.extras["measure"] = measure_summary(mu)
    return report


def null_product_exponents(alpha, n: int) -> List[float]:
    """
    Factor exponents (xi'', sigma, tau) of a null product with total dimension alpha.

    sigma takes min(alpha, 1), then each xi'' axis up to 1, then tau the
    rest; an axis of dimension d gets exponent d - 1 (delta when d = 0).
    """
    remaining = as_rational(alpha)
    dims = [Fraction(0)] * (n + 1)
    order = [n - 1] + list(range(n - 1)) + [n]
    for axis in order:
        take = min(remaining, Fraction(1))
        dims[axis] = take
        remaining -= take
    return [float(d) - 1.0 for d in dims]


def pushforward_experiment(n: int = 2, alpha=Fraction(3, 2), levels="1:4", extent: float = 1.0,
                           spacing: float = 2.0 ** -12, trials: int = 32, seed: int = 0,
                           tolerance: float = 0.25) -> ExperimentReport:
    """
    Growth constant of T_j # mu over j, in units of 2^j.

    The measure is a product in null coordinates on a uniform grid. Every
    level gets a full audit (sampled centers, radii from its own floor up)
    so each ratio compares two sups over x and rho.
    """
    ExponentQuery(alpha, 2, n)
    alpha = as_rational(alpha)
    scales = _scales(levels)
    mu = make_null_product(n, null_product_exponents(alpha, n), extent=extent, spacing=spacing)
    base = estimate_growth_constant(mu, float(alpha), trials=trials, seed=seed)
    if base.diverging_trend:
        raise QuadratureNotConvergedError(
            f"null product fails its own growth audit (trend slope {base.trend_slope:.3f})")

    def point(scale):
        j = int(round(math.log2(scale)))
        audit = estimate_growth_constant(anisotropic_pushforward(mu, j), float(alpha), trials=trials, seed=seed)
        return audit.estimated_constant / base.estimated_constant, {
            "j": j, "constant": audit.estimated_constant, "radius_floor": audit.radius_floor,
            "worst_radius": audit.worst_radius,
        }

    ratios, infos = run_ladder(scales, point, 1, "pushforward")
    predicted = pushforward_growth_exponent(alpha, n)
    report = ExperimentReport("pushforward", {"n": n, "alpha": alpha, "levels": scales, "spacing": spacing,
                                              "exponents": null_product_exponents(alpha, n)}, seed=seed)
    report.fit = fit_ladder(scales, ratios, predicted=predicted, tolerance=tolerance, variable="2^j")
    report.extras["base_constant"] = base.estimated_constant
    report.extras["base_audit"] = base.as_row()
    report.extras["points"] = infos
    return report


# --- audits -------------------------------------------------------------------------------

def _growth_family(family: str, n: int, alpha: float, ladder: Sequence[float]):
    if family == "cantor":
        return [(int(d), make_cantor(alpha, n, int(d))) for d in (ladder or range(4, 9))]
    if family in ("radial", "delta", "lebesgue"):
        ladder = ladder or (3, 4, 5)
        out = []
        for k in ladder:
            resolution = 2.0 ** -int(k)
            if family == "radial":
                out.append((int(k), make_radial_power(alpha, n, resolution)))
            elif family == "delta":
                out.append((int(k), make_delta_product(alpha, n, resolution)))
            else:
                out.append((int(k), make_lebesgue_ball(n, resolution)))
        return out
    if family == "plate_union":
        kind = "high" if alpha > n else "mid"
        return [(R, make_plate_union_measure(kind, alpha, n, R)) for R in (ladder or (32.0, 64.0, 128.0, 256.0))]
    if family == "null":
        exponents = null_product_exponents(alpha, n)
        return [(int(k), make_null_product(n, exponents, spacing=2.0 ** -int(k))) for k in (ladder or (10, 11, 12))]
    raise InvalidInputError(f"unknown measure family {family!r}")


def _floor_trend(audits: Sequence[GrowthAudit]) -> float:
    """Slope of log(constant) against log(radius floor) across a ladder of measures."""
    floors = [a.radius_floor for a in audits]
    if len(set(floors)) < 2:
        return 0.0
    return float(stats.linregress(np.log(floors), np.log([a.estimated_constant for a in audits])).slope)


def growth_audit_experiment(family: str = "cantor", n: int = 2, alpha=Fraction(3, 2), ladder=None,
                            trials: int = 64, seed: int = 0, variation_limit: float = None) -> ExperimentReport:
    """
    Growth constants stay stable along a refinement ladder; a planted mislabel is caught.

    Plate unions are a family in R: each one looks lower-dimensional between
    its floor and the lattice spacing, so their trend is read across the
    ladder (log constant against log floor) instead of inside one audit.

    Args:
        family: cantor, radial, delta, lebesgue, plate_union or null
        n: Spatial dimension
        alpha: Claimed dimension
        ladder: Depths (cantor), -log2 resolutions or spacings, R values
        trials: Centers per audit
        seed: RNG seed
        variation_limit: Largest allowed max/min ratio of the constants

    Returns:
        ExperimentReport without a slope fit
    """
    ExponentQuery(alpha, 2, n)
    a = float(as_rational(alpha))
    if family == "lebesgue":
        a = float(n + 1)
    limit = EXPERIMENT_SETTINGS["growth_variation"] if variation_limit is None else float(variation_limit)
    ladder = list(parse_ladder(ladder)) if ladder is not None else None
    threshold = AUDIT_SETTINGS["trend_threshold"]
    built = _growth_family(family, n, a, ladder)
    audits = [estimate_growth_constant(mu, a, trials=trials, seed=seed) for _, mu in built]
    rows = [dict(audit.as_row(), step=step, label=mu.label, atoms=mu.atom_count)
            for (step, mu), audit in zip(built, audits)]
    constants = [audit.estimated_constant for audit in audits]
    report = ExperimentReport("growth_audit", {"family": family, "n": n, "alpha": a, "ladder": ladder,
                                               "trials": trials}, seed=seed)
    spread = max(constants) / min(constants) if min(constants) > 0 else math.inf
    report.check("constant_variation", spread, limit, spread < limit)

    if family == "plate_union":
        slope = _floor_trend(audits)
        report.check("no_diverging_trend", slope, f"> {threshold}", slope >= threshold)
        planted_audits = [estimate_growth_constant(mu.relabeled(a + 0.5), trials=trials, seed=seed)
                          for _, mu in built]
        planted_slope = _floor_trend(planted_audits)
        report.check("mislabel_flagged", planted_slope, f"< {threshold}", planted_slope < threshold)
        report.extras["mislabeled"] = [audit.as_row() for audit in planted_audits]
    else:
        report.check("no_diverging_trend", [audit.trend_slope for audit in audits], f"> {threshold}",
                     not any(audit.diverging_trend for audit in audits))
        planted = estimate_growth_constant(built[-1][1].relabeled(a + 0.5), trials=trials, seed=seed)
        report.check("mislabel_flagged", planted.trend_slope, f"< {threshold}", planted.diverging_trend)
        report.extras["mislabeled"] = planted.as_row()
    report.extras["audits"] = rows
    return report


def beta_recursion_experiment(count: int = 50, tol=None, max_steps: int = None) -> ExperimentReport:
    """The exponent recursion decreases monotonically to beta(alpha, q, n) on a fixed grid."""
    tol = EXPERIMENT_SETTINGS["recursion_tolerance"] if tol is None else as_rational(tol)
    max_steps = EXPERIMENT_SETTINGS["recursion_max_steps"] if max_steps is None else int(max_steps)
    grid = beta_recursion_grid(count)
    rows = []
    for query in grid:
        betas = beta_recursion(query.alpha, query.q, query.n, steps=max_steps)
        steps = beta_recursion_steps(query.alpha, query.q, query.n, tol=tol, max_steps=max_steps)
        limit = beta_recursion_limit(query.alpha, query.q, query.n)
        target = max(Fraction(query.n, 2) - query.alpha * inverse_q(query.q),
                     Fraction(3 * query.n + 1, 8) - query.alpha / 4)
        rows.append({
            "n": query.n, "alpha": format_rational(query.alpha), "q": format_rational(query.q),
            "steps": steps, "limit": format_rational(limit),
            "monotone": all(b >= c for b, c in zip(betas, betas[1:])),
            "limit_matches": limit == target,
        })
    report = ExperimentReport("beta_recursion", {"count": count, "tol": tol, "max_steps": max_steps})
    report.check("grid_size", len(grid), count, len(grid) == count)
    worst = max((row["steps"] for row in rows if row["steps"] is not None), default=0)
    report.check("converged", worst, max_steps, all(row["steps"] is not None for row in rows))
    report.check("monotone", sum(row["monotone"] for row in rows), len(rows), all(row["monotone"] for row in rows))
    report.check("limit_is_beta", sum(row["limit_matches"] for row in rows), len(rows),
                 all(row["limit_matches"] for row in rows))
    report.extras["rows"] = rows
    return report


def whitney_experiment(n: int = 2, R: float = 16.0, alpha=Fraction(3, 2), depth: int = 4, spacing: float = 0.5,
                       seed: int = 0, jobs: int = 1) -> ExperimentReport:
    """
    Pointwise Whitney bound |f^|^2 <= sum over related pairs plus the adjacent diagonal, at measure atoms.
    """
    ExponentQuery(alpha, 2, n)
    f = random_cone_function(R, n, spacing, seed=seed)
    mu = make_cantor(float(as_rational(alpha)), n, depth)
    decomposition = whitney_cover_pairs(R, n)
    full = ft_at_points(f, mu.points, jobs=jobs).values
    scale = float(np.max(np.abs(full))) or 1.0

    parts = {}
    partition_error = 0.0
    for j in range(1, decomposition.j0 + 1):
        pieces = np.stack([ft_at_points(angular_project(f, cap), mu.points, jobs=jobs).values
                           for cap in whitney_caps(j, n)])
        partition_error = max(partition_error, float(np.max(np.abs(pieces.sum(axis=0) - full))) / scale)
        parts[j] = np.abs(pieces)

    bound = np.zeros(len(mu.points))
    for j, pairs in decomposition.pairs.items():
        for k, m in pairs:
            bound += parts[j][k] * parts[j][m]
    top = decomposition.j0
    level = cap_level(top, n)
    for k in range(level.count):
        for m in np.flatnonzero(level.adjacent_mask(k)):
            bound += parts[top][k] * parts[top][m]
    defect = float(np.min(bound - np.abs(full) ** 2)) / scale ** 2

    report = ExperimentReport("whitney", {"n": n, "R": R, "alpha": alpha, "depth": depth, "spacing": spacing},
                              seed=seed)
    report.check("caps_partition_function", partition_error, EXPERIMENT_SETTINGS["partition_tolerance"],
                 partition_error <= EXPERIMENT_SETTINGS["partition_tolerance"])
    report.check("pointwise_bound", defect, -1e-9, defect >= -1e-9)
    report.extras["j0"] = top
    report.extras["related_pairs"] = {j: len(p) for j, p in decomposition.pairs.items()}
    report.exports["caps"] = export_caps(whitney_caps(top, n), decomposition.pairs.get(top, []))
    report.fields["field"] = (mu.points, full)
    return report


def oracle_experiment(family: str = "box", n: int = 2, R: float = 64.0, points: int = 100, seed: int = 0,
                      tolerance: float = None) -> ExperimentReport:
    """Closed-form transforms against direct quadrature at random points of B(0, 1/R)."""
    tolerance = EXPERIMENT_SETTINGS["oracle_tolerance"] if tolerance is None else float(tolerance)
    rng = np.random.default_rng(seed)
    probe = rng.uniform(-1.0, 1.0, size=(points, n + 1))
    probe *= rng.uniform(0.0, 1.0, size=(points, 1)) ** (1.0 / (n + 1)) / (R * np.linalg.norm(probe, axis=1,
                                                                                             keepdims=True))
    report = ExperimentReport("oracle", {"family": family, "n": n, "R": R, "points": points}, seed=seed)
    if family == "cone_shell":
        f = cone_shell_indicator(R, n)
        exact = ft_at_points(f, probe).values
        oracle = np.array([cone_shell_ft_oracle(R, n, x) for x in probe])
        detail = {"method": "nested_quad"}
    else:
        if family == "box":
            f = plate_indicator(knapp_plate(R, n))
        elif family == "windowed":
            f = windowed_plate(knapp_plate(R, n))
        elif family == "lattice":
            f = lattice_sum(lattice_plan("mid", (n + 1) / 2.0, n, R))
        else:
            raise InvalidInputError(f"unknown oracle family {family!r}")
        exact = ft_at_points(f, probe).values
        oracle, detail = ft_grid_converged(f, probe)
    error = float(np.max(np.abs(exact - oracle))) / float(np.max(np.abs(exact)))
    report.check("relative_error", error, tolerance, error <= tolerance)
    report.convergence["oracle"] = dict(detail, passed=error <= tolerance)
    return report


# --- wave packets and the wave equation -------------------------------------------------------

def packets_experiment(n: int = 2, R_ladder="64,128,256", seed: int = 0, delta: float = 0.1,
                       decay_delta: float = 0.3, jobs: int = 1) -> ExperimentReport:
    """Packet decomposition quality and the cube-localized bilinear bound over R."""
    scales = _scales(R_ladder)
    e1 = np.zeros(n)
    e1[0] = 1.0
    rows = []
    bilinear = []
    summaries = {}
    for R in scales:
        dictionary = packet_dictionary(R, n)
        F = random_slab_data(dictionary, seed, direction=e1, half_angle=math.pi / 8)
        G = random_slab_data(dictionary, seed + 1, direction=-e1, half_angle=math.pi / 8)
        expansion_f, expansion_g = decompose(F, jobs), decompose(G, jobs)
        split = split_energy(expansion_f, delta)
        epsilon = max(0.0, math.log(split["ratio"]) / math.log(R)) if split["ratio"] > 0 else 0.0
        local = bilinear_local(expansion_f, expansion_g, delta)
        bilinear.append(local["ratio"])
        summaries[R] = expansion_f.summary()
        rows.append({
            "R": R,
            "reconstruction_error": reconstruction_error(F, expansion_f),
            "coefficient_ratio": expansion_f.coefficient_ratio,
            "support_inflation": support_inflation(expansion_f.reconstruct()),
            "tube_decay": bool(tube_decay_check(expansion_f, decay_delta)["passed"]),
            "split_epsilon": epsilon,
            "bilinear_ratio": local["ratio"],
        })
        logger.info("packets_scale_done", R=R, **{k: v for k, v in rows[-1].items() if k != "R"})

    report = ExperimentReport("packets", {"n": n, "R_ladder": scales, "delta": delta, "decay_delta": decay_delta},
                              seed=seed)
    limits = EXPERIMENT_SETTINGS
    report.check("reconstruction", max(r["reconstruction_error"] for r in rows), limits["packet_reconstruction"],
                 all(r["reconstruction_error"] <= limits["packet_reconstruction"] for r in rows))
    report.check("coefficient_ratio", max(r["coefficient_ratio"] for r in rows), limits["packet_coefficient_ratio"],
                 all(r["coefficient_ratio"] <= limits["packet_coefficient_ratio"] for r in rows))
    report.check("support_inflation", max(r["support_inflation"] for r in rows),
                 limits["packet_support_inflation"],
                 all(r["support_inflation"] <= limits["packet_support_inflation"] for r in rows))
    report.check("tube_decay", [r["tube_decay"] for r in rows], True, all(r["tube_decay"] for r in rows))
    report.check("split_epsilon", max(r["split_epsilon"] for r in rows), limits["packet_epsilon"],
                 all(r["split_epsilon"] <= limits["packet_epsilon"] for r in rows))
    if all(b > 0 for b in bilinear) and len(scales) > 1:
        slope, stderr = growth_slope(np.log2(scales), bilinear)
        ceiling = -(n + 3) / 4.0 + limits["packet_bilinear_slack"]
        report.check("bilinear_local_slope", slope, ceiling, slope <= ceiling)
        report.extras["bilinear_slope"] = {"slope": slope, "stderr": stderr}
    report.series["bilinear_local"] = (scales, bilinear, "R")
    report.extras["rows"] = rows
    report.exports["coefficients"] = {"R": scales[-1], "top": summaries[scales[-1]]}
    return report


def wave_equation_experiment(n: int = 2, alpha=Fraction(5, 2), q=Fraction(2), s=None,
                             data_family: str = "focused", R_ladder="2:5", size: int = 512,
                             length: float = 4.0 * math.pi, depth: int = 4, seed: int = 0,
                             tolerance: float = 0.15, jobs: int = 1) -> ExperimentReport:
    """
    Solutions of the wave equation sampled on a Cantor measure in space-time.

    Band-limited data at frequency 2^j give the per-band ratio, whose
    growth in 2^j is at most s~; the full solution with H^s x H^{s-1}
    data above s~ stays bounded. Littlewood-Paley reconstruction, L^2
    conservation, time reversal and the low-frequency bound are checked
    on the same grid.
    """
    query = ExponentQuery(alpha, q, n)
    s_tilde = s_sufficient(query).value
    s = s_tilde + Fraction(1, 5) if s is None else as_rational(s)
    if s <= s_tilde + Fraction(1, 10):
        raise InvalidInputError(f"s must exceed s~ + 1/10 = {format_rational(s_tilde + Fraction(1, 10))}")
    if data_family not in ("focused", "random"):
        raise InvalidInputError(f"data_family must be 'focused' or 'random', got {data_family!r}")
    scales = _scales(R_ladder)
    bands = [int(round(math.log2(v))) for v in scales]
    if min(bands) < 1:
        raise InvalidInputError("frequency bands start at 2^1")
    grid = spectral_grid(n, size, length)
    reach = (size // 2 - 1) * grid.spacing[0]
    if 2.0 ** (max(bands) + 1) > reach:
        raise QuadratureNotConvergedError(f"band 2^{max(bands)} is under-resolved on a {size}-point grid",
                                          coarse=2.0 ** (max(bands) + 1), fine=reach)
    mu = make_cantor(float(query.alpha), n, depth)
    atoms = mu.points
    plancherel = (2.0 * math.pi) ** (-n / 2.0)
    phase_seed = None if data_family == "focused" else seed

    def band_point(scale):
        j = int(round(math.log2(scale)))
        band = littlewood_paley(annulus_data(grid, j, phase_seed), j)
        ratio = lq_norm_mu(sample_half_wave_at(band, atoms), mu, query.q) / (l2_norm_freq(band) * plancherel)
        return ratio, {"j": j}

    ratios, infos = run_ladder(scales, band_point, jobs, "wave_band")

    full, reversal = [], 0.0
    reflect = np.ones(n + 1)
    reflect[n] = -1.0
    for j in bands:
        f_data = annulus_data(grid, j, phase_seed)
        g_data = annulus_data(grid, j, None if phase_seed is None else phase_seed + 1)
        u = sample_wave_at(f_data, g_data, atoms)
        size_norm = (sobolev_norm(f_data, float(s)) + sobolev_norm(g_data, float(s) - 1.0)) * plancherel
        full.append(lq_norm_mu(u, mu, query.q) / size_norm)
        mirrored = sample_wave_at(f_data, g_data.with_values(-g_data.values), atoms * reflect)
        peak = float(np.max(np.abs(u.values))) or 1.0
        reversal = max(reversal, float(np.max(np.abs(mirrored.values - u.values))) / peak)

    rng = np.random.default_rng(seed)
    noise = spectral_data(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))
    rebuilt = low_part(noise).values.copy()
    for j in range(1, lp_top_band(noise) + 1):
        rebuilt += littlewood_paley(noise, j).values
    lp_error = float(np.max(np.abs(rebuilt - noise.values))) / float(np.max(np.abs(noise.values)))

    top = littlewood_paley(noise, max(bands))
    before = float(np.linalg.norm(to_spatial(top)))
    after = float(np.linalg.norm(to_spatial(half_wave_evolve(top, 1.0))))
    conservation = abs(after - before) / before

    low = low_part(noise)
    area = float(np.count_nonzero(low.values)) * grid.cell_volume
    low_ratio = float(np.max(np.abs(sample_half_wave_at(low, atoms).values))) / (l2_norm_freq(low) * plancherel)
    low_bound = plancherel * math.sqrt(area)

    report = ExperimentReport("wave", {"n": n, "alpha": query.alpha, "q": query.q, "s": s,
                                       "data_family": data_family, "R_ladder": scales, "size": size,
                                       "length": length, "depth": depth}, seed=seed)
    report.fit = fit_ladder(scales, ratios, upper=float(s_tilde), tolerance=tolerance, variable="2^j",
                            two_sided=False, notes={"s_sufficient": format_rational(s_tilde)})
    limits = EXPERIMENT_SETTINGS
    slope, _ = growth_slope(bands, full)
    report.check("full_solution_bounded", slope, limits["wave_bounded_slope"], slope <= limits["wave_bounded_slope"])
    report.check("littlewood_paley_exact", lp_error, 1e-12, lp_error <= 1e-12)
    report.check("half_wave_l2_conserved", conservation, limits["wave_conservation"],
                 conservation <= limits["wave_conservation"])
    report.check("time_reversal", reversal, limits["wave_reversal"], reversal <= limits["wave_reversal"])
    report.check("low_band_bound", low_ratio, low_bound, low_ratio <= low_bound * (1 + 1e-9))
    report.extras["low_band_area"] = {"grid": area, "disc": ball_volume(n) * 2.0 ** n}
    report.series["full_solution"] = (scales, full, "2^j")
    report.extras["measure"] = measure_summary(mu)
    report.extras["points"] = infos
    return report


# --- registry ---------------------------------------------------------------------------------

EXPERIMENTS: Dict[str, Callable[..., ExperimentReport]] = {
    "knapp": knapp_cone_experiment,
    "plate": plate_experiment,
    "lattice": lattice_experiment,
    "linear_upper": linear_upper_experiment,
    "bilinear": bilinear_experiment,
    "localization": localization_experiment,
    "convolution": convolution_experiment,
    "average_decay": average_decay_experiment,
    "pushforward": pushforward_experiment,
    "growth_audit": growth_audit_experiment,
    "beta_recursion": beta_recursion_experiment,
    "whitney": whitney_experiment,
    "oracle": oracle_experiment,
    "packets": packets_experiment,
    "wave": wave_equation_experiment,
}

DEFAULT_CONFIG: Dict[str, Dict] = {
    "knapp": {"n": 2, "alpha": "3/2", "q": "2", "R_ladder": "5:9"},
    "plate": {"n": 3, "alpha": "2", "q": "2"},
    "lattice": {"kind": "mid", "n": 2, "alpha": "3/2", "q": "2"},
    "linear_upper": {"family": "knapp", "n": 2, "alpha": "3/2", "q": "2"},
    "bilinear": {"n": 2, "alpha": "2", "q": "2", "R_ladder": "5:8", "variant": "transversal"},
    "localization": {"n": 2, "alpha": "2", "q": "inf", "rho_ladder": "-5:-1", "R": 16},
    "convolution": {"n": 3, "alpha": "2", "r_norm": "inf", "R_ladder": "4:8", "measure": "radial"},
    "average_decay": {"n": 3, "measure": "lebesgue", "R_ladder": "3:7"},
    "pushforward": {"n": 2, "alpha": "3/2", "levels": "1:4"},
    "growth_audit": {"family": "cantor", "n": 2, "alpha": "3/2"},
    "beta_recursion": {"count": 50},
    "whitney": {"n": 2, "R": 16, "alpha": "3/2"},
    "oracle": {"family": "box", "n": 2, "R": 64, "points": 100},
    "packets": {"n": 2, "R_ladder": "64,128,256"},
    "wave": {"n": 2, "alpha": "5/2", "q": "2", "R_ladder": "2:5"},
}

INT_KEYS = {"n", "depth", "count", "size", "trials", "points", "oracle_points", "cells_per_axis", "max_steps", "seed"}
RATIONAL_KEYS = {"alpha", "beta", "s", "tol"}
EXPONENT_KEYS = {"q", "r_norm"}
LADDER_KEYS = {"R_ladder", "rho_ladder", "levels"}
FLOAT_KEYS = {"resolution", "tolerance", "upper_tolerance", "R", "spacing", "delta", "decay_delta", "length",
              "variation_limit", "extent"}


def coerce_param(name: str, value):
    """Convert a config or CLI value to the type an experiment expects."""
    if value is None:
        return None
    try:
        if name in INT_KEYS:
            return int(value)
        if name in RATIONAL_KEYS:
            return as_rational(value if not isinstance(value, float) else repr(value))
        if name in EXPONENT_KEYS:
            return parse_q(value)
        if name in LADDER_KEYS:
            return parse_ladder(value)
        if name in FLOAT_KEYS:
            return float(as_rational(value)) if isinstance(value, str) and "/" in value else float(value)
    except (TypeError, ValueError) as e:
        raise InvalidInputError(f"parameter {name}={value!r}: {e}")
    return value


def default_seed() -> int:
    try:
        return int(os.getenv("CFL_DEFAULT_SEED", "0"))
    except ValueError:
        raise InvalidInputError(f"CFL_DEFAULT_SEED must be an integer, got {os.getenv('CFL_DEFAULT_SEED')!r}")


def resolve_params(name: str, params: Dict = None) -> Dict:
    """Defaults merged with overrides, type-coerced and checked against the experiment signature."""
    if name not in EXPERIMENTS:
        raise InvalidInputError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    accepted = inspect.signature(EXPERIMENTS[name]).parameters
    merged = dict(DEFAULT_CONFIG.get(name, {}))
    merged.update(params or {})
    unknown = sorted(set(merged) - set(accepted))
    if unknown:
        raise InvalidInputError(f"experiment {name} does not take {unknown}")
    return {key: coerce_param(key, value) for key, value in merged.items()}


def run_experiment(name: str, params: Dict = None, seed: int = None, jobs: int = None,
                   tolerance: float = None) -> ExperimentReport:
    """
    Run one registered experiment.

    Args:
        name: Registry key
        params: Overrides of DEFAULT_CONFIG[name]
        seed: Seed (CFL_DEFAULT_SEED or 0 when absent)
        jobs: Worker threads (CFL_JOBS or 1 when absent)
        tolerance: Verdict slack override

    Returns:
        ExperimentReport with the resolved configuration embedded
    """
    kwargs = resolve_params(name, params)
    accepted = inspect.signature(EXPERIMENTS[name]).parameters
    seed = default_seed() if seed is None else int(seed)
    jobs = int(os.getenv("CFL_JOBS", "1")) if jobs is None else int(jobs)
    if jobs < 1:
        raise InvalidInputError(f"jobs must be >= 1, got {jobs}")
    if "seed" in accepted and "seed" not in (params or {}):
        kwargs["seed"] = seed
    if "jobs" in accepted:
        kwargs["jobs"] = jobs
    if tolerance is not None and "tolerance" in accepted:
        kwargs["tolerance"] = float(tolerance)

    logger.info("experiment_started", experiment=name, params=canonical_value(kwargs))
    started = time.perf_counter()
    report = EXPERIMENTS[name](**kwargs)
    report.runtime = time.perf_counter() - started
    report.seed = kwargs.get("seed", seed)
    report.config = {"experiment": name, "params": canonical_value({k: v for k, v in kwargs.items() if k != "jobs"}),
                     "seed": report.seed, "tolerance": tolerance}
    logger.info("experiment_finished", experiment=name, verdict=report.verdict,
                seconds=round(report.runtime, 3))
    return report


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Run one scale-ladder experiment")
    parser.add_argument("name", choices=sorted(EXPERIMENTS))
    parser.add_argument("--param", action="append", default=[], help="key=value override")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    overrides = dict(item.split("=", 1) for item in args.param)
    result = run_experiment(args.name, overrides, seed=args.seed, jobs=args.jobs)
    result.write(args.out)
    print(f"{args.name}: {result.verdict}")
