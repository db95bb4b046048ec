#!/usr/bin/env python3
"""
Exponent Calculator - exact rational exponent functions for fractal Strichartz estimates
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/05_numerical_contracts.md

Every value here is a fractions.Fraction. q = infinity is the INF sentinel,
never a large rational, and 1/INF evaluates to exactly 0.
"""

import os
import sys
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.lab_errors import InvalidInputError, RegimeMismatchError


class QInfinity(Enum):
    """Distinguished value for q = infinity."""

    INF = "inf"

    def __repr__(self) -> str:
        return "INF"


INF = QInfinity.INF

QValue = Union[Fraction, QInfinity]
RationalLike = Union[Fraction, int, float, str]


class Branch(Enum):
    """Term of the piecewise maximum; declaration order is the tie order."""

    KNAPP = "KNAPP"
    PLATE = "PLATE"
    LATTICE = "LATTICE"


class Regime(Enum):
    LOW = "LOW"      # alpha <= 1
    MID = "MID"      # 1 < alpha <= n
    HIGH = "HIGH"    # n < alpha <= n+1


class Example(Enum):
    """Lower-bound constructions with a predicted scaling exponent."""

    KNAPP_CONE = "KNAPP_CONE"
    PLATE = "PLATE"
    LATTICE_MID = "LATTICE_MID"
    LATTICE_HIGH = "LATTICE_HIGH"


BRANCH_ORDER = (Branch.KNAPP, Branch.PLATE, Branch.LATTICE)


def as_rational(value: RationalLike) -> Fraction:
    """
    Convert a number or string ("3/2", "0.25", 2) to an exact Fraction.

    Floats go through their shortest repr so 0.1 becomes 1/10.

    Args:
        value: Fraction, int, float or string

    Returns:
        Reduced Fraction
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidInputError(f"Not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise InvalidInputError(f"Not a finite rational: {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise InvalidInputError(f"Cannot parse rational {value!r}: {e}")
    raise InvalidInputError(f"Unsupported rational type: {type(value).__name__}")


def parse_q(value: Union[RationalLike, QInfinity]) -> QValue:
    """
    Parse a Lebesgue exponent, accepting "inf", float('inf') or INF.

    Args:
        value: Exponent in any accepted spelling

    Returns:
        Fraction or INF
    """
    if value is INF:
        return INF
    if isinstance(value, float) and value == float("inf"):
        return INF
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "oo"):
        return INF
    return as_rational(value)


def parse_rational(text: str) -> QValue:
    """Parse CLI/config text into a Fraction or INF."""
    return parse_q(text)


def format_rational(value: QValue) -> str:
    """Canonical text form: "inf", "3", "-1/2"."""
    if value is INF:
        return "inf"
    return str(as_rational(value))


def inverse_q(q: QValue) -> Fraction:
    """1/q with 1/INF = 0."""
    if q is INF:
        return Fraction(0)
    return 1 / q


def regime_of(alpha: Fraction, n: int) -> Regime:
    """
    Classify alpha; alpha = 1 belongs to LOW and alpha = n to MID.

    Args:
        alpha: Dimension parameter
        n: Spatial dimension

    Returns:
        Regime enum value
    """
    if alpha <= 1:
        return Regime.LOW
    if alpha <= n:
        return Regime.MID
    return Regime.HIGH


@dataclass(frozen=True)
class ExponentQuery:
    """Validated (alpha, q, n) triple; alpha and q are stored exactly."""

    alpha: Fraction
    q: QValue
    n: int

    def __post_init__(self):
        alpha = as_rational(self.alpha)
        q = parse_q(self.q)
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 2:
            raise InvalidInputError(f"n must be an integer >= 2, got {self.n!r}")
        if alpha <= 0 or alpha > self.n + 1:
            raise InvalidInputError(f"alpha must lie in (0, n+1] = (0, {self.n + 1}], got {alpha}")
        if q is not INF and q < 1:
            raise InvalidInputError(f"q must be >= 1, got {q}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "q", q)

    @property
    def regime(self) -> Regime:
        return regime_of(self.alpha, self.n)


@dataclass(frozen=True)
class ExponentValue:
    """Value of a piecewise maximum with the branch and regime that produced it."""

    value: Fraction
    branch: Branch
    regime: Regime
    terms: Tuple[Tuple[Branch, Fraction], ...] = field(default=(), compare=False)


def _query(query_or_alpha, q=None, n=None) -> ExponentQuery:
    if isinstance(query_or_alpha, ExponentQuery):
        return query_or_alpha
    return ExponentQuery(query_or_alpha, q, n)


def _pick(terms: Sequence[Tuple[Branch, Fraction]], regime: Regime) -> ExponentValue:
    best = max(value for _, value in terms)
    for branch in BRANCH_ORDER:
        for candidate, value in terms:
            if candidate is branch and value == best:
                return ExponentValue(best, branch, regime, tuple(terms))
    raise AssertionError("unreachable: maximum not attained")


def _plate_numerator(alpha: Fraction, n: int, regime: Regime) -> Fraction:
    if regime is Regime.LOW:
        return Fraction(0)
    if regime is Regime.MID:
        return 1 - alpha
    return n + 1 - 2 * alpha


def _knapp_term(alpha: Fraction, q: QValue, n: int) -> Fraction:
    return Fraction(n, 2) - alpha * inverse_q(q)


def _plate_term(alpha: Fraction, q: QValue, n: int, regime: Regime) -> Fraction:
    return Fraction(n + 1, 4) + _plate_numerator(alpha, n, regime) * inverse_q(q) / 2


def s_necessary(query: ExponentQuery, q: QValue = None, n: int = None) -> ExponentValue:
    """
    Necessary regularity s(alpha, q, n).

    LOW has only the KNAPP and PLATE terms; MID adds (n+2-alpha)/4 and HIGH
    adds (n+1-alpha)/2 as the LATTICE term.

    Args:
        query: ExponentQuery (or alpha, with q and n given positionally)

    Returns:
        ExponentValue with binding branch
    """
    query = _query(query, q, n)
    alpha, q, n, regime = query.alpha, query.q, query.n, query.regime

    terms = [
        (Branch.KNAPP, _knapp_term(alpha, q, n)),
        (Branch.PLATE, _plate_term(alpha, q, n, regime)),
    ]
    if regime is Regime.MID:
        terms.append((Branch.LATTICE, Fraction(n + 2, 4) - alpha / 4))
    elif regime is Regime.HIGH:
        terms.append((Branch.LATTICE, Fraction(n + 1, 2) - alpha / 2))
    return _pick(terms, regime)


def s_sufficient(query: ExponentQuery, q: QValue = None, n: int = None) -> ExponentValue:
    """
    Sufficient regularity s~(alpha, q, n).

    The third term is (3n+1)/8 - alpha/4 for LOW/MID and (n+1-alpha)/2 for
    HIGH. Below q = 2 the q = 2 value is returned, which still dominates
    s_necessary since s_necessary is nondecreasing in q.

    Args:
        query: ExponentQuery (or alpha, with q and n given positionally)

    Returns:
        ExponentValue with binding branch
    """
    query = _query(query, q, n)
    alpha, n, regime = query.alpha, query.n, query.regime
    q = query.q
    if q is not INF and q < 2:
        q = Fraction(2)

    if regime is Regime.HIGH:
        third = Fraction(n + 1, 2) - alpha / 2
    else:
        third = Fraction(3 * n + 1, 8) - alpha / 4

    terms = [
        (Branch.KNAPP, _knapp_term(alpha, q, n)),
        (Branch.PLATE, _plate_term(alpha, q, n, regime)),
        (Branch.LATTICE, third),
    ]
    return _pick(terms, regime)


def sharpness_gap(query: ExponentQuery, q: QValue = None, n: int = None) -> Fraction:
    """s_sufficient - s_necessary; nonnegative for every valid query."""
    query = _query(query, q, n)
    return s_sufficient(query).value - s_necessary(query).value


def _require_q_at_least_two(q: QValue, name: str) -> QValue:
    q = parse_q(q)
    if q is not INF and q < 2:
        raise InvalidInputError(f"{name} requires q >= 2, got {q}")
    return q


def beta_bilinear(alpha: RationalLike, q: QValue, n: int) -> Fraction:
    """
    Bilinear exponent beta(alpha, q) = max{n/2 - alpha/q, (3n+1-2alpha)/8}.

    Args:
        alpha: Dimension parameter in (0, n+1]
        q: Exponent, q >= 2
        n: Spatial dimension

    Returns:
        beta as a Fraction
    """
    q = _require_q_at_least_two(q, "beta_bilinear")
    query = ExponentQuery(alpha, q, n)
    return max(
        _knapp_term(query.alpha, q, n),
        Fraction(3 * n + 1, 8) - query.alpha / 4,
    )


def gamma_rescale(alpha: RationalLike, beta: RationalLike, q: QValue, n: int) -> Fraction:
    """
    Rescaling exponent gamma(alpha, beta, n).

    gamma = -4 beta + {2(n+1-2alpha)/q | 2(1-alpha)/q | 0} + n + 1 by regime.

    Args:
        alpha: Dimension parameter
        beta: Bilinear exponent being rescaled
        q: Exponent, q >= 2
        n: Spatial dimension

    Returns:
        gamma as a Fraction
    """
    q = _require_q_at_least_two(q, "gamma_rescale")
    query = ExponentQuery(alpha, q, n)
    beta = as_rational(beta)
    correction = 2 * _plate_numerator(query.alpha, n, query.regime) * inverse_q(q)
    return -4 * beta + correction + n + 1


def beta_diag(alpha: RationalLike, q: QValue, n: int) -> Fraction:
    """Diagonal exponent beta_o(alpha, q) = (n+1)/4 + regime q-term."""
    q = _require_q_at_least_two(q, "beta_diag")
    query = ExponentQuery(alpha, q, n)
    return _plate_term(query.alpha, q, n, query.regime)


def classical_admissible(q: QValue, r: QValue, n: int, s: RationalLike) -> bool:
    """
    Classical admissibility: 1/q + n/r = n/2 - s and 1/q + (n-1)/(2r) <= (n-1)/4.

    Args:
        q: Time exponent, 2 <= q < inf
        r: Space exponent, 2 <= r < inf
        n: Spatial dimension
        s: Regularity, s >= 0

    Returns:
        True when both the scaling identity and the inequality hold
    """
    q, r = parse_q(q), parse_q(r)
    if q is INF or r is INF:
        raise InvalidInputError("classical admissibility requires finite q and r")
    if q < 2 or r < 2:
        raise InvalidInputError(f"classical admissibility requires q, r >= 2, got q={q}, r={r}")
    s = as_rational(s)
    if s < 0:
        raise InvalidInputError(f"s must be nonnegative, got {s}")
    scaling = 1 / q + Fraction(n) / r == Fraction(n, 2) - s
    admissible = 1 / q + Fraction(n - 1, 2) / r <= Fraction(n - 1, 4)
    return scaling and admissible


def predicted_example_slope(example: Union[Example, str], alpha: RationalLike,
                            q: QValue, n: int) -> Fraction:
    """
    Lower-bound exponent forced by a construction.

    Args:
        example: Example enum (or its name)
        alpha: Dimension parameter
        q: Exponent
        n: Spatial dimension

    Returns:
        Predicted R-slope of the norm ratio
    """
    if isinstance(example, str):
        try:
            example = Example[example.upper()]
        except KeyError:
            raise InvalidInputError(f"Unknown example {example!r}")
    query = ExponentQuery(alpha, q, n)
    alpha, q, regime = query.alpha, query.q, query.regime

    if example is Example.KNAPP_CONE:
        return _knapp_term(alpha, q, n)
    if example is Example.PLATE:
        return _plate_term(alpha, q, n, regime)
    if example is Example.LATTICE_MID:
        if regime is not Regime.MID:
            raise RegimeMismatchError(f"LATTICE_MID needs 1 < alpha <= n, got alpha={alpha}, n={n}")
        return Fraction(n + 2, 4) - alpha / 4
    if regime is not Regime.HIGH:
        raise RegimeMismatchError(f"LATTICE_HIGH needs n < alpha <= n+1, got alpha={alpha}, n={n}")
    return Fraction(n + 1, 2) - alpha / 2


def pushforward_growth_exponent(alpha: RationalLike, n: int) -> Fraction:
    """Exponent of 2^j in the growth bound of the anisotropic pushforward."""
    alpha = as_rational(alpha)
    return min(n + 1 - 2 * alpha, 1 - alpha, Fraction(0))


def decay_exponent_bound(alpha: RationalLike, n: int) -> Fraction:
    """R-exponent -n + 2 s(alpha, 2, n) bounding the surface-averaged decay."""
    return -n + 2 * s_necessary(ExponentQuery(alpha, 2, n)).value


# --- induction-on-scales exponent recursion ---------------------------------

def _recursion_constants(alpha: Fraction, q: QValue, n: int, c: Fraction):
    big_a = Fraction(3 * n + 1, 8) - alpha / 4
    big_b = Fraction(n, 2) - alpha * inverse_q(q)
    c_tilde = c + n + 1
    return big_a, big_b, c_tilde


def beta_recursion(alpha: RationalLike, q: QValue, n: int, steps: int = 200,
                   c: RationalLike = 0) -> List[Fraction]:
    """
    Iterate beta_{i+1} = A + c~(beta_i - A) / (c~ - n + 2alpha/q + 2beta_i) from n/2.

    A = (3n+1-2alpha)/8 and c~ = c + n + 1. The fixed points are A and
    n/2 - alpha/q; the iteration decreases monotonically to their maximum.

    Args:
        alpha: Dimension parameter
        q: Exponent, q >= 2
        n: Spatial dimension
        steps: Number of iterations
        c: Nonnegative constant from the scale-induction bookkeeping

    Returns:
        [beta_0, ..., beta_steps] as exact Fractions
    """
    q = _require_q_at_least_two(q, "beta_recursion")
    query = ExponentQuery(alpha, q, n)
    c = as_rational(c)
    if c < 0:
        raise InvalidInputError(f"c must be nonnegative, got {c}")
    big_a, _, c_tilde = _recursion_constants(query.alpha, q, n, c)
    shift = c_tilde - n + 2 * query.alpha * inverse_q(q)

    betas = [Fraction(n, 2)]
    for _ in range(steps):
        beta = betas[-1]
        betas.append(big_a + c_tilde * (beta - big_a) / (shift + 2 * beta))
    return betas


def beta_recursion_limit(alpha: RationalLike, q: QValue, n: int) -> Fraction:
    """Limit of the recursion, equal to beta_bilinear."""
    return beta_bilinear(alpha, q, n)


def beta_recursion_rate(alpha: RationalLike, q: QValue, n: int, c: RationalLike = 0) -> Fraction:
    """
    Contraction factor of the recursion at its limit.

    Returns c~/(c~+m) when A >= B and 1 - m/c~ when B > A, m = 2|A - B|.
    """
    q = _require_q_at_least_two(q, "beta_recursion_rate")
    query = ExponentQuery(alpha, q, n)
    big_a, big_b, c_tilde = _recursion_constants(query.alpha, q, n, as_rational(c))
    gap = 2 * abs(big_a - big_b)
    if big_a >= big_b:
        return c_tilde / (c_tilde + gap)
    return 1 - gap / c_tilde


def beta_recursion_steps(alpha: RationalLike, q: QValue, n: int, tol: RationalLike = Fraction(1, 10 ** 9),
                         max_steps: int = 200, c: RationalLike = 0) -> Optional[int]:
    """
    Number of iterations until |beta_i - limit| <= tol, or None within max_steps.
    """
    tol = as_rational(tol)
    limit = beta_recursion_limit(alpha, q, n)
    for i, beta in enumerate(beta_recursion(alpha, q, n, steps=max_steps, c=c)):
        if abs(beta - limit) <= tol:
            return i
    return None


def beta_recursion_grid(count: int = 50, c: RationalLike = 0,
                        min_gap: RationalLike = Fraction(1, 8)) -> List[ExponentQuery]:
    """
    Deterministic grid of queries for the recursion.

    Scans n in 2..5, q in {2, 5/2, 3, 4} and alpha on quarter steps, keeping
    points with 2|A - B| >= min_gap * c~. The default 1/8 keeps the
    contraction rate at or below 8/9; min_gap = 0 keeps every point,
    including the double fixed points A = B where convergence is only 1/i.

    Args:
        count: Number of grid points wanted
        c: Recursion constant
        min_gap: Smallest kept 2|A - B| in units of c~

    Returns:
        First `count` qualifying queries
    """
    c = as_rational(c)
    min_gap = as_rational(min_gap)
    grid = []
    for n in range(2, 6):
        for q in (Fraction(2), Fraction(5, 2), Fraction(3), Fraction(4)):
            for k in range(1, 4 * (n + 1) + 1):
                alpha = Fraction(k, 4)
                big_a, big_b, c_tilde = _recursion_constants(alpha, q, n, c)
                if 2 * abs(big_a - big_b) >= min_gap * c_tilde:
                    grid.append(ExponentQuery(alpha, q, n))
                    if len(grid) == count:
                        return grid
    return grid


# --- tables -----------------------------------------------------------------

def exponent_table(n: int, alphas: Iterable[RationalLike], qs: Iterable[QValue]) -> pd.DataFrame:
    """
    Exact exponent table over an (alpha, q) grid.

    Args:
        n: Spatial dimension
        alphas: alpha values
        qs: q values (INF allowed)

    Returns:
        DataFrame with rational columns rendered as canonical strings
    """
    rows = []
    for alpha in alphas:
        for q in qs:
            query = ExponentQuery(alpha, q, n)
            necessary = s_necessary(query)
            sufficient = s_sufficient(query)
            rows.append({
                "n": n,
                "alpha": format_rational(query.alpha),
                "q": format_rational(query.q),
                "regime": query.regime.value,
                "s_necessary": format_rational(necessary.value),
                "branch_necessary": necessary.branch.value,
                "s_sufficient": format_rational(sufficient.value),
                "branch_sufficient": sufficient.branch.value,
                "gap": format_rational(sufficient.value - necessary.value),
            })
    return pd.DataFrame(rows, columns=[
        "n", "alpha", "q", "regime", "s_necessary", "branch_necessary",
        "s_sufficient", "branch_sufficient", "gap",
    ])


def parse_grid(text: str) -> List[QValue]:
    """
    Parse "a:b:step" ranges or comma lists ("2,4,8,inf") into exact values.

    Args:
        text: Grid text

    Returns:
        List of Fractions / INF
    """
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInputError(f"Range grid must be start:stop:step, got {text!r}")
        start, stop, step = (as_rational(p) for p in parts)
        if step <= 0:
            raise InvalidInputError(f"Grid step must be positive, got {step}")
        values = []
        value = start
        while value <= stop:
            values.append(value)
            value += step
        return values
    return [parse_q(item) for item in text.split(",") if item.strip()]


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Exact exponent table")
    parser.add_argument("--n", type=int, default=3, help="Spatial dimension")
    parser.add_argument("--alpha-grid", default="1/4:4:1/4", help="start:stop:step or comma list")
    parser.add_argument("--q-grid", default="2,4,8,inf", help="comma list, inf allowed")
    args = parser.parse_args()

    table = exponent_table(args.n, parse_grid(args.alpha_grid), parse_grid(args.q_grid))
    print(table.to_string(index=False))
