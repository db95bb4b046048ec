#!/usr/bin/env python3
"""
Slope Fitting - log2-log2 least squares over scale ladders and verdicts
Directive: directives/scaling_experiments.md

A ladder is a list of (scale, ratio) pairs with scales strictly increasing
powers of 2. The fitted slope carries its standard error; a verdict widens
the slope by two standard errors before comparing it with the bracket
[lower - tolerance, upper + tolerance].
"""

import os
import sys
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.lab_errors import InvalidInputError
from tools.lab_logging import get_logger

logger = get_logger(__name__)

MIN_LADDER_POINTS = 4
STDERR_WIDTH = 2.0


class Verdict(Enum):
    CONSISTENT = "CONSISTENT"
    VIOLATION_UPPER = "VIOLATION_UPPER"
    BELOW_LOWER = "BELOW_LOWER"


@dataclass(frozen=True)
class SlopeFit:
    """Fitted log-log slope of a ladder, compared against a predicted exponent."""

    ladder: Tuple[Tuple[float, float], ...]
    slope: float
    stderr: float
    intercept: float
    residuals: Tuple[float, ...]
    predicted: Optional[Fraction]
    lower: Optional[float]
    upper: Optional[float]
    tolerance: float
    upper_tolerance: float
    verdict: Verdict
    variable: str = "R"
    notes: Dict = field(default_factory=dict, compare=False)

    @property
    def scales(self) -> List[float]:
        return [s for s, _ in self.ladder]

    @property
    def ratios(self) -> List[float]:
        return [r for _, r in self.ladder]

    @property
    def consistent(self) -> bool:
        return self.verdict is Verdict.CONSISTENT

    def as_dict(self) -> Dict:
        return {
            "variable": self.variable,
            "ladder": [[s, r] for s, r in self.ladder],
            "slope": self.slope,
            "stderr": self.stderr,
            "intercept": self.intercept,
            "residuals": list(self.residuals),
            "predicted": None if self.predicted is None else str(self.predicted),
            "lower": self.lower,
            "upper": self.upper,
            "tolerance": self.tolerance,
            "upper_tolerance": self.upper_tolerance,
            "verdict": self.verdict.value,
            "notes": dict(self.notes),
        }


def validate_ladder(scales: Sequence[float], ratios: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Check a ladder and return (log2 scales, log2 ratios).

    Args:
        scales: Strictly increasing powers of 2 (negative powers allowed)
        ratios: Positive measured ratios

    Returns:
        Tuple of log2 arrays
    """
    scales = np.asarray(scales, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    if scales.shape != ratios.shape or scales.ndim != 1:
        raise InvalidInputError("ladder scales and ratios must be 1-D and of equal length")
    if len(scales) < MIN_LADDER_POINTS:
        raise InvalidInputError(f"ladder needs at least {MIN_LADDER_POINTS} points, got {len(scales)}")
    if np.any(scales <= 0):
        raise InvalidInputError("ladder scales must be positive")
    log_s = np.log2(scales)
    if np.any(np.abs(log_s - np.round(log_s)) > 1e-9):
        raise InvalidInputError(f"ladder scales must be powers of 2, got {scales.tolist()}")
    if np.any(np.diff(log_s) <= 0):
        raise InvalidInputError("ladder scales must be strictly increasing")
    if not np.all(np.isfinite(ratios)) or np.any(ratios <= 0):
        raise InvalidInputError(f"ladder ratios must be finite and positive, got {ratios.tolist()}")
    return log_s, np.log2(ratios)


def classify(slope: float, stderr: float, lower: Optional[float], upper: Optional[float],
             tolerance: float, upper_tolerance: float = None) -> Verdict:
    """
    Verdict of a slope against [lower, upper] (either side may be open).

    The slope interval slope +- 2 stderr must reach into the bracket
    widened by tolerance below and upper_tolerance (default tolerance) above.
    """
    upper_tolerance = tolerance if upper_tolerance is None else upper_tolerance
    low_edge = slope - STDERR_WIDTH * stderr
    high_edge = slope + STDERR_WIDTH * stderr
    if upper is not None and low_edge > upper + upper_tolerance:
        return Verdict.VIOLATION_UPPER
    if lower is not None and high_edge < lower - tolerance:
        return Verdict.BELOW_LOWER
    return Verdict.CONSISTENT


def fit_ladder(scales: Sequence[float], ratios: Sequence[float], predicted=None,
               lower: float = None, upper: float = None, tolerance: float = 0.1,
               variable: str = "R", two_sided: bool = True, notes: Dict = None,
               upper_tolerance: float = None) -> SlopeFit:
    """
    Least-squares slope of log2(ratio) against log2(scale).

    Args:
        scales: Ladder scales (powers of 2)
        ratios: Ladder ratios
        predicted: Predicted exponent (Fraction); sets the bracket when lower/upper are absent
        lower: Lower end of the acceptable bracket
        upper: Upper end of the acceptable bracket
        tolerance: Slack added on both sides
        variable: Scale name for artifacts ("R", "rho", "2^j")
        two_sided: With only predicted given, use it as both ends (else as the lower end)
        notes: Extra provenance carried into the report
        upper_tolerance: Slack above upper when it differs from tolerance

    Returns:
        SlopeFit
    """
    log_s, log_r = validate_ladder(scales, ratios)
    if tolerance < 0:
        raise InvalidInputError(f"tolerance must be nonnegative, got {tolerance}")
    result = stats.linregress(log_s, log_r)
    slope = float(result.slope)
    stderr = float(result.stderr) if np.isfinite(result.stderr) else 0.0
    intercept = float(result.intercept)
    residuals = log_r - (intercept + slope * log_s)

    if predicted is not None:
        predicted = Fraction(predicted)
        if lower is None:
            lower = float(predicted)
        if upper is None and two_sided:
            upper = float(predicted)
    verdict = classify(slope, stderr, lower, upper, tolerance, upper_tolerance)

    fit = SlopeFit(
        ladder=tuple((float(s), float(r)) for s, r in zip(scales, ratios)),
        slope=slope, stderr=stderr, intercept=intercept,
        residuals=tuple(float(r) for r in residuals),
        predicted=predicted, lower=None if lower is None else float(lower),
        upper=None if upper is None else float(upper), tolerance=float(tolerance),
        upper_tolerance=float(tolerance if upper_tolerance is None else upper_tolerance),
        verdict=verdict, variable=variable, notes=dict(notes or {}),
    )
    logger.info("slope_fitted", variable=variable, slope=round(slope, 6), stderr=round(stderr, 6),
                lower=fit.lower, upper=fit.upper, verdict=verdict.value)
    return fit


def slope_within(fit: SlopeFit, target: float, tolerance: float) -> bool:
    """|slope - target| <= tolerance, ignoring the stderr widening."""
    return abs(fit.slope - float(target)) <= tolerance


def power_ladder(low_exponent: int, high_exponent: int) -> List[float]:
    """[2^low, ..., 2^high]."""
    if high_exponent - low_exponent + 1 < MIN_LADDER_POINTS:
        raise InvalidInputError(f"ladder 2^{low_exponent}..2^{high_exponent} has fewer than {MIN_LADDER_POINTS} points")
    return [2.0 ** k for k in range(low_exponent, high_exponent + 1)]


def parse_ladder(text) -> List[float]:
    """
    Parse "5:9" (exponent range), "32,64,128,256" or a list of numbers.

    Args:
        text: Ladder spelling

    Returns:
        Scales as floats
    """
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if ":" in text:
        low, high = text.split(":", 1)
        return power_ladder(int(low), int(high))
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidInputError(f"unreadable ladder {text!r}")


def growth_slope(xs: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """(slope, stderr) of log2(values) against xs, for ladders that are not powers of 2."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise InvalidInputError("values must be positive")
    result = stats.linregress(np.asarray(xs, dtype=float), np.log2(values))
    return float(result.slope), float(result.stderr) if math.isfinite(result.stderr) else 0.0


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Fit a log-log slope to a ladder")
    parser.add_argument("--scales", required=True, help="e.g. 5:9 or 32,64,128,256")
    parser.add_argument("--ratios", required=True, help="comma separated")
    parser.add_argument("--predicted", default=None)
    parser.add_argument("--tolerance", type=float, default=0.1)
    args = parser.parse_args()

    fit = fit_ladder(parse_ladder(args.scales), [float(v) for v in args.ratios.split(",")],
                     predicted=None if args.predicted is None else Fraction(args.predicted),
                     tolerance=args.tolerance)
    print(f"slope = {fit.slope:.4f} +- {fit.stderr:.4f} -> {fit.verdict.value}")
