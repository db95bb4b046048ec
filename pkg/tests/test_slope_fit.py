import math
from fractions import Fraction as F

import numpy as np
import pytest

from execution.slope_fit import (
    Verdict, classify, fit_ladder, growth_slope, parse_ladder, power_ladder, slope_within,
)
from tools.lab_errors import InvalidInputError


def _ladder(exponent, low=5, high=9):
    scales = power_ladder(low, high)
    return scales, [s ** exponent for s in scales]


def test_exact_power_law_is_consistent():
    scales, ratios = _ladder(0.75)
    fit = fit_ladder(scales, ratios, predicted=F(3, 4))
    assert math.isclose(fit.slope, 0.75, abs_tol=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    assert fit.consistent
    assert fit.scales == scales


@pytest.mark.parametrize("predicted,verdict", [
    (F(1, 4), Verdict.VIOLATION_UPPER),
    (F(2), Verdict.BELOW_LOWER),
    (F(13, 16), Verdict.CONSISTENT),
])
def test_verdicts_against_prediction(predicted, verdict):
    scales, ratios = _ladder(0.75)
    assert fit_ladder(scales, ratios, predicted=predicted, tolerance=0.1).verdict is verdict


def test_one_sided_prediction_is_a_lower_bound():
    scales, ratios = _ladder(0.75)
    fit = fit_ladder(scales, ratios, predicted=F(1, 2), two_sided=False)
    assert fit.upper is None
    assert fit.consistent


def test_upper_tolerance_overrides_tolerance():
    scales, ratios = _ladder(0.75)
    assert fit_ladder(scales, ratios, lower=0.5, upper=0.7, tolerance=0.0, upper_tolerance=0.1).consistent
    loose_below = fit_ladder(scales, ratios, lower=0.5, upper=0.7, tolerance=0.2, upper_tolerance=0.01)
    assert loose_below.verdict is Verdict.VIOLATION_UPPER


def test_stderr_widens_the_slope():
    # noisy points whose slope misses the bracket by less than two standard errors
    assert classify(1.0, 0.2, lower=None, upper=0.6, tolerance=0.05) is Verdict.CONSISTENT
    assert classify(1.0, 0.1, lower=None, upper=0.6, tolerance=0.05) is Verdict.VIOLATION_UPPER


def test_payload_is_plain():
    scales, ratios = _ladder(0.5)
    payload = fit_ladder(scales, ratios, predicted=F(1, 2), variable="rho", notes={"bracket": "exact"}).as_dict()
    assert payload["predicted"] == "1/2"
    assert payload["variable"] == "rho"
    assert payload["verdict"] == "CONSISTENT"
    assert payload["notes"] == {"bracket": "exact"}


@pytest.mark.parametrize("scales,ratios", [
    ([32, 64, 128], [1.0, 2.0, 4.0]),
    ([32, 64, 100, 256], [1.0, 2.0, 3.0, 4.0]),
    ([64, 32, 128, 256], [1.0, 2.0, 3.0, 4.0]),
    ([32, 64, 128, 256], [1.0, 0.0, 3.0, 4.0]),
    ([32, 64, 128, 256], [1.0, float("nan"), 3.0, 4.0]),
])
def test_malformed_ladders(scales, ratios):
    with pytest.raises(InvalidInputError):
        fit_ladder(scales, ratios)


def test_negative_tolerance():
    scales, ratios = _ladder(1.0)
    with pytest.raises(InvalidInputError):
        fit_ladder(scales, ratios, tolerance=-0.1)


def test_negative_powers_allowed():
    scales = power_ladder(-5, -1)
    fit = fit_ladder(scales, [s ** -1.5 for s in scales], predicted=F(-3, 2), variable="rho")
    assert fit.consistent


@pytest.mark.parametrize("text,expected", [
    ("5:8", [32.0, 64.0, 128.0, 256.0]),
    ("64,128,256,512", [64.0, 128.0, 256.0, 512.0]),
    ([2, 4, 8, 16], [2.0, 4.0, 8.0, 16.0]),
])
def test_parse_ladder(text, expected):
    assert parse_ladder(text) == expected


def test_parse_ladder_errors():
    with pytest.raises(InvalidInputError):
        parse_ladder("5:6")
    with pytest.raises(InvalidInputError):
        parse_ladder("a,b")


def test_slope_within():
    scales, ratios = _ladder(0.75)
    fit = fit_ladder(scales, ratios)
    assert slope_within(fit, 0.7, 0.06)
    assert not slope_within(fit, 0.5, 0.1)


def test_growth_slope_linear_axis():
    xs = np.arange(1, 6)
    slope, stderr = growth_slope(xs, 3.0 * 2.0 ** (0.5 * xs))
    assert math.isclose(slope, 0.5, abs_tol=1e-12)
    assert stderr == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        growth_slope(xs, [1.0, -1.0, 1.0, 1.0, 1.0])
