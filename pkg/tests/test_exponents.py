from fractions import Fraction as F

import pytest

from tools.exponents import (
    INF, Branch, Example, ExponentQuery, Regime, beta_bilinear, beta_diag,
    beta_recursion, beta_recursion_grid, beta_recursion_limit, beta_recursion_rate,
    beta_recursion_steps, classical_admissible, exponent_table, format_rational,
    gamma_rescale, parse_grid, parse_q, predicted_example_slope,
    pushforward_growth_exponent, s_necessary, s_sufficient, sharpness_gap,
)
from tools.lab_errors import InvalidInputError, RegimeMismatchError


@pytest.mark.parametrize("n,alpha,q,value,branch", [
    (3, F(2), F(2), F(3, 4), Branch.PLATE),
    (3, F(4), F(2), F(0), Branch.PLATE),
    (3, F(3), INF, F(3, 2), Branch.KNAPP),
    (2, F(2), F(4), F(5, 8), Branch.PLATE),
])
def test_s_necessary_examples(n, alpha, q, value, branch):
    result = s_necessary(ExponentQuery(alpha, q, n))
    assert result.value == value
    assert result.branch is branch


@pytest.mark.parametrize("n,alpha,q,value", [
    (3, F(2), F(2), F(3, 4)),
    (4, F(2), F(2), F(9, 8)),
    (3, F(7, 2), F(2), F(1, 4)),
])
def test_s_sufficient_examples(n, alpha, q, value):
    assert s_sufficient(ExponentQuery(alpha, q, n)).value == value


@pytest.mark.parametrize("n,alpha,q,gap", [
    (3, F(2), F(2), F(0)),
    (4, F(3), F(2), F(1, 8)),
    (3, F(1, 2), F(8), F(0)),
])
def test_sharpness_gap_examples(n, alpha, q, gap):
    assert sharpness_gap(ExponentQuery(alpha, q, n)) == gap


def test_knapp_binds_both_sides_at_low_alpha():
    query = ExponentQuery(F(1, 2), 8, 3)
    assert s_necessary(query).value == F(23, 16)
    assert s_necessary(query).branch is Branch.KNAPP
    assert s_sufficient(query).branch is Branch.KNAPP


@pytest.mark.parametrize("alpha,q,n", [(0, 2, 3), (F(9, 2), 2, 3), (1, F(1, 2), 3), (1, 2, 1)])
def test_invalid_queries_rejected(alpha, q, n):
    with pytest.raises(InvalidInputError):
        ExponentQuery(alpha, q, n)


def test_sharpness_region_n3_is_exact():
    alphas = [F(k, 4) for k in range(4, 17)]
    qs = [F(2), F(5, 2), F(3), F(4), F(8), INF]
    for alpha in alphas:
        assert F(3 * 3 + 1, 8) - alpha / 4 == F(3 + 2, 4) - alpha / 4
        for q in qs:
            assert sharpness_gap(ExponentQuery(alpha, q, 3)) == 0, (alpha, q)


def test_gap_nonnegative_everywhere():
    for n in range(2, 6):
        for k in range(1, 4 * (n + 1) + 1):
            for q in (F(1), F(3, 2), F(2), F(3), F(8), INF):
                assert sharpness_gap(ExponentQuery(F(k, 4), q, n)) >= 0


def test_s_necessary_monotone_in_q_and_alpha():
    qs = [F(1), F(3, 2), F(2), F(3), F(8), INF]
    for n in (2, 3, 4):
        alphas = [F(k, 4) for k in range(1, 4 * (n + 1) + 1)]
        for alpha in alphas:
            values = [s_necessary(ExponentQuery(alpha, q, n)).value for q in qs]
            assert values == sorted(values)
        for q in qs:
            values = [s_necessary(ExponentQuery(alpha, q, n)).value for alpha in alphas]
            assert values == sorted(values, reverse=True)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_regime_formulas_agree_at_boundaries(n):
    for q in (F(2), F(3), INF):
        iq = 0 if q is INF else 1 / q
        # MID formula evaluated at alpha = 1
        mid_at_one = max(F(n, 2) - iq, F(n + 1, 4), F(n + 1, 4))
        assert s_necessary(ExponentQuery(1, q, n)).value == mid_at_one
        # HIGH formula evaluated at alpha = n
        high_at_n = max(F(n, 2) - n * iq, F(n + 1, 4) + (1 - n) * iq / 2, F(1, 2))
        assert s_necessary(ExponentQuery(n, q, n)).value == high_at_n
        assert ExponentQuery(n, q, n).regime is Regime.MID


@pytest.mark.parametrize("alpha,q,n,value", [
    (2, 2, 3, F(3, 4)),
    (4, 4, 3, F(1, 2)),
    (3, 2, 2, F(1, 8)),
])
def test_beta_bilinear_examples(alpha, q, n, value):
    assert beta_bilinear(alpha, q, n) == value


def test_beta_bilinear_rejects_small_q():
    with pytest.raises(InvalidInputError):
        beta_bilinear(2, F(3, 2), 3)


@pytest.mark.parametrize("alpha,beta,q,n,value", [
    (2, F(3, 4), 2, 3, F(0)),
    (4, F(1, 2), 2, 3, F(-2)),
    (1, 1, 2, 3, F(0)),
])
def test_gamma_rescale_examples(alpha, beta, q, n, value):
    assert gamma_rescale(alpha, beta, q, n) == value


def test_gamma_sign_threshold():
    for n in (2, 3):
        for k in range(1, 4 * (n + 1) + 1):
            alpha = F(k, 4)
            threshold = beta_diag(alpha, 2, n)
            assert gamma_rescale(alpha, threshold, 2, n) == 0
            assert gamma_rescale(alpha, threshold + F(1, 8), 2, n) < 0
            assert gamma_rescale(alpha, threshold - F(1, 8), 2, n) > 0


@pytest.mark.parametrize("alpha,q,n,value", [
    (2, 2, 3, F(3, 4)),
    (4, 4, 3, F(1, 2)),
    (F(1, 2), 2, 3, F(1)),
])
def test_beta_diag_examples(alpha, q, n, value):
    assert beta_diag(alpha, q, n) == value


def test_classical_admissible():
    assert classical_admissible(4, 4, 3, F(1, 2)) is True
    assert classical_admissible(2, 2, 3, F(1, 2)) is False
    with pytest.raises(InvalidInputError):
        classical_admissible(4, INF, 3, F(1, 2))
    with pytest.raises(InvalidInputError):
        classical_admissible(INF, 4, 3, 0)


def test_predicted_example_slopes():
    assert predicted_example_slope(Example.KNAPP_CONE, F(3, 2), 2, 2) == F(1, 4)
    assert predicted_example_slope(Example.PLATE, 2, 2, 3) == F(3, 4)
    assert predicted_example_slope(Example.LATTICE_HIGH, F(7, 2), 2, 3) == F(1, 4)
    assert predicted_example_slope("lattice_mid", F(3, 2), 2, 2) == F(5, 8)
    with pytest.raises(RegimeMismatchError):
        predicted_example_slope(Example.LATTICE_MID, F(7, 2), 2, 3)
    with pytest.raises(RegimeMismatchError):
        predicted_example_slope(Example.LATTICE_HIGH, 2, 2, 3)


def test_pushforward_growth_exponent_per_regime():
    assert pushforward_growth_exponent(F(5, 2), 2) == -2
    assert pushforward_growth_exponent(2, 2) == -1
    assert pushforward_growth_exponent(F(1, 2), 2) == 0
    assert pushforward_growth_exponent(4, 3) == -4


def test_beta_recursion_converges_on_grid():
    grid = beta_recursion_grid(50)
    assert len(grid) == 50
    tol = F(1, 10 ** 9)
    for query in grid:
        betas = beta_recursion(query.alpha, query.q, query.n, steps=200)
        limit = beta_recursion_limit(query.alpha, query.q, query.n)
        assert limit == max(F(query.n, 2) - query.alpha / query.q,
                            F(3 * query.n + 1, 8) - query.alpha / 4)
        assert all(b1 >= b2 for b1, b2 in zip(betas, betas[1:]))
        assert all(b >= limit for b in betas)
        assert abs(betas[-1] - limit) <= tol
        assert beta_recursion_rate(query.alpha, query.q, query.n) <= F(8, 9)


def test_beta_recursion_on_unfiltered_grid():
    grid = beta_recursion_grid(50, min_gap=0)
    assert len(grid) == 50
    assert (F(1, 2), F(2), 2) in [(query.alpha, query.q, query.n) for query in grid]
    for query in grid:
        betas = beta_recursion(query.alpha, query.q, query.n, steps=200)
        limit = beta_recursion_limit(query.alpha, query.q, query.n)
        assert all(b1 >= b2 >= limit for b1, b2 in zip(betas, betas[1:]))
        # the slowest case is a double fixed point, where the gap shrinks like c~/(2i)
        assert betas[-1] - limit <= F(1, 50)


def test_beta_recursion_steps_reports_first_hit():
    steps = beta_recursion_steps(F(1, 4), 2, 3)
    assert steps is not None and steps <= 200
    assert beta_recursion_steps(F(1, 4), 2, 3, max_steps=0) is None


def test_exponent_table_and_grids():
    table = exponent_table(3, parse_grid("1:4:1/2"), parse_grid("2,4,8,inf"))
    assert list(table.columns)[:3] == ["n", "alpha", "q"]
    assert len(table) == 7 * 4
    assert set(table["gap"]) == {"0"}
    assert parse_q("inf") is INF
    assert format_rational(F(-1, 2)) == "-1/2"
    assert parse_grid("0.25:0.75:0.25") == [F(1, 4), F(1, 2), F(3, 4)]
