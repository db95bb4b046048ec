import json
from fractions import Fraction as F

import numpy as np
import pytest

from execution.experiments import (
    DEFAULT_CONFIG, EXPERIMENTS, ExperimentReport, bilinear_experiment, canonical_value,
    convolution_experiment, localization_experiment, null_product_exponents, oracle_experiment,
    resolve_params, run_experiment, run_ladder, wave_equation_experiment,
)
from execution.slope_fit import fit_ladder, power_ladder
from tools.exponents import INF
from tools.lab_errors import InvalidInputError, QuadratureNotConvergedError, RegimeMismatchError


def test_canonical_value():
    value = {"alpha": F(3, 2), "q": INF, "n": np.int64(3), "x0": np.zeros(2), "r": np.float64(0.5)}
    assert canonical_value(value) == {"alpha": "3/2", "q": "inf", "n": 3, "x0": [0.0, 0.0], "r": 0.5}


def test_every_experiment_has_defaults():
    assert set(DEFAULT_CONFIG) == set(EXPERIMENTS)
    for name in EXPERIMENTS:
        resolve_params(name)


def test_resolve_params_coerces_types():
    params = resolve_params("knapp", {"alpha": "5/4", "q": "inf", "R_ladder": "5:8", "n": "3"})
    assert params["alpha"] == F(5, 4)
    assert params["q"] is INF
    assert params["R_ladder"] == [32.0, 64.0, 128.0, 256.0]
    assert params["n"] == 3


def test_resolve_params_errors():
    with pytest.raises(InvalidInputError):
        resolve_params("teleport")
    with pytest.raises(InvalidInputError):
        resolve_params("knapp", {"colour": "blue"})
    with pytest.raises(InvalidInputError):
        resolve_params("knapp", {"n": "two"})


def test_run_ladder_keeps_order():
    ratios, infos = run_ladder([2.0, 4.0, 8.0, 16.0], lambda s: (s * s, {"half": s / 2}), jobs=3)
    assert ratios == [4.0, 16.0, 64.0, 256.0]
    assert [info["half"] for info in infos] == [1.0, 2.0, 4.0, 8.0]


def test_report_failures_and_verdict(tmp_path):
    report = ExperimentReport("demo", {"alpha": F(1, 2)})
    report.check("good", 0.1, 1.0, True)
    report.check("bad", 2.0, 1.0, False)
    assert not report.passed
    assert report.verdict == "CHECK_FAILED"
    assert [entry["name"] for entry in report.failures()] == ["bad"]
    assert report.check_named("good")["passed"]


def test_report_verdict_follows_fit():
    scales = power_ladder(5, 8)
    report = ExperimentReport("demo", {})
    report.fit = fit_ladder(scales, [s ** 2 for s in scales], upper=1.0, tolerance=0.1)
    assert report.verdict == "VIOLATION_UPPER"
    assert report.failures()[0]["kind"] == "verdict"


def test_report_write(tmp_path):
    scales = power_ladder(5, 8)
    report = ExperimentReport("demo", {"q": INF})
    report.fit = fit_ladder(scales, [s ** 0.5 for s in scales], predicted=F(1, 2))
    report.series["side"] = (scales, [1.0] * 4, "R")
    report.exports["caps"] = {"alpha": F(3, 2), "pairs": [(0, 1)]}
    report.fields["field"] = (np.zeros((2, 3)), np.array([1 + 1j, 2.0]))
    report.runtime = 1.23456
    paths = report.write(str(tmp_path))
    assert (tmp_path / "demo_ladder.csv").exists()
    assert (tmp_path / "demo_side.csv").exists()
    assert json.loads(paths["caps"].read_text()) == {"alpha": "3/2", "pairs": [[0, 1]]}
    assert paths["field"].read_text().splitlines()[0] == "x0,x1,x2,real,imag"
    payload = json.loads(paths["report"].read_text())
    assert payload["params"] == {"q": "inf"}
    assert payload["verdict"] == "CONSISTENT"
    assert "runtime" not in payload
    assert json.loads(paths["runtime"].read_text())["runtime_seconds"] == 1.235


def test_payload_is_deterministic():
    first = run_experiment("beta_recursion", {"count": 10}, seed=0).to_payload()
    second = run_experiment("beta_recursion", {"count": 10}, seed=0).to_payload()
    assert first == second


def test_beta_recursion_experiment():
    report = run_experiment("beta_recursion", {"count": 20})
    assert report.passed
    assert report.check_named("grid_size")["value"] == 20
    assert report.config["experiment"] == "beta_recursion"


@pytest.mark.parametrize("alpha,n,expected", [
    (F(3, 2), 2, [-0.5, 0.0, -1.0]),
    (F(5, 2), 2, [0.0, 0.0, -0.5]),
    (F(1, 2), 3, [-1.0, -1.0, -0.5, -1.0]),
])
def test_null_product_exponents(alpha, n, expected):
    assert null_product_exponents(alpha, n) == expected


def test_pushforward_experiment():
    report = run_experiment("pushforward", {})
    assert report.fit.variable == "2^j"
    assert report.passed, report.failures()


@pytest.mark.parametrize("family", ["box", "windowed", "lattice"])
def test_oracle_experiment(family):
    report = oracle_experiment(family=family, n=2, R=64.0, points=5, seed=1)
    assert report.passed, report.failures()
    assert report.convergence["oracle"]["passed"]


def test_oracle_unknown_family():
    with pytest.raises(InvalidInputError):
        oracle_experiment(family="sphere", points=2)


def test_localization_ladder_must_stay_in_unit_ball():
    with pytest.raises(InvalidInputError):
        localization_experiment(rho_ladder="-2:2")


def test_convolution_norm_domain():
    with pytest.raises(InvalidInputError):
        convolution_experiment(r_norm=3)


def test_transversal_bilinear_regime():
    with pytest.raises(RegimeMismatchError):
        bilinear_experiment(n=2, alpha=F(5, 2))


def test_wave_requires_smoothness_above_threshold():
    with pytest.raises(InvalidInputError):
        wave_equation_experiment(s=-10)
    with pytest.raises(InvalidInputError):
        wave_equation_experiment(data_family="chirp")


def test_wave_refuses_under_resolved_grid():
    with pytest.raises(QuadratureNotConvergedError):
        wave_equation_experiment(size=32, R_ladder="2:5")


def test_run_experiment_rejects_bad_jobs():
    with pytest.raises(InvalidInputError):
        run_experiment("beta_recursion", {"count": 5}, jobs=0)


def test_seed_comes_from_environment(monkeypatch):
    monkeypatch.setenv("CFL_DEFAULT_SEED", "7")
    report = run_experiment("oracle", {"points": 3})
    assert report.seed == 7
    assert report.config["seed"] == 7


@pytest.mark.slow
def test_localization_experiment():
    report = run_experiment("localization", {})
    assert report.fit.variable == "rho"
    assert report.check_named("unit_radius_matches_unlocalized")["passed"]
    assert report.passed, report.failures()


@pytest.mark.slow
@pytest.mark.parametrize("name,params", [
    ("knapp", {}),
    ("plate", {}),
    ("lattice", {}),
    ("linear_upper", {}),
    ("bilinear", {}),
    ("convolution", {}),
    ("average_decay", {}),
    ("growth_audit", {}),
    ("whitney", {}),
    ("packets", {}),
    ("wave", {}),
])
def test_default_ladders_are_consistent(name, params):
    report = run_experiment(name, params)
    assert report.passed, report.failures()


@pytest.mark.slow
@pytest.mark.parametrize("n,alpha,q,first", [
    (3, "1/2", "4", 16.0),
    (3, "2", "2", 16.0),
    (3, "7/2", "2", 256.0),
])
def test_plate_rows_per_regime(n, alpha, q, first):
    report = run_experiment("plate", {"n": n, "alpha": alpha, "q": q})
    assert report.params["R_ladder"][0] == first
    assert report.verdict == "CONSISTENT", report.failures()
    assert abs(report.fit.slope - float(report.fit.predicted)) <= 0.1


@pytest.mark.slow
@pytest.mark.parametrize("params,expected", [
    ({"q": "inf"}, 1.0),
    ({"n": 3, "alpha": "2", "q": "2", "R_ladder": "5:8"}, 0.5),
])
def test_knapp_rows(params, expected):
    report = run_experiment("knapp", params)
    assert report.passed, report.failures()
    assert report.fit.slope == pytest.approx(expected, abs=0.1)


@pytest.mark.slow
def test_high_lattice_runs_at_default_ladder():
    report = run_experiment("lattice", {"kind": "high", "n": 3, "alpha": "7/2"})
    assert report.params["R_ladder"] == [16.0, 32.0, 64.0, 128.0]
    assert np.all(np.isfinite(report.fit.ratios))
    assert np.isfinite(report.fit.slope)
    assert [point["boxes"] for point in report.extras["points"]][2] == 529


@pytest.mark.slow
@pytest.mark.parametrize("alpha", ["1/2", "3/2", "5/2"])
def test_pushforward_per_regime(alpha):
    report = run_experiment("pushforward", {"n": 2, "alpha": alpha})
    assert report.passed, report.failures()
    assert not report.extras["base_audit"]["diverging_trend"]


@pytest.mark.slow
@pytest.mark.parametrize("family", ["cantor", "radial", "delta", "lebesgue", "plate_union", "null"])
def test_growth_audit_families(family):
    report = run_experiment("growth_audit", {"family": family})
    assert report.check_named("no_diverging_trend")["passed"], report.failures()
    assert report.check_named("mislabel_flagged")["passed"], report.failures()
    assert report.passed, report.failures()


@pytest.mark.slow
def test_random_family_default_ladder():
    report = run_experiment("linear_upper", {"family": "random"})
    assert report.params["R_ladder"] == [8.0, 16.0, 32.0, 64.0]
    assert report.passed, report.failures()


@pytest.mark.slow
def test_sharp_bracket_on_knapp_at_infinity():
    report = run_experiment("linear_upper", {"family": "knapp", "q": "inf", "bracket": "sharp"})
    assert report.passed, report.failures()
    assert report.fit.slope == pytest.approx(1.0, abs=0.1)


@pytest.mark.slow
@pytest.mark.parametrize("params,expected", [
    ({"r_norm": "1"}, 0.0),
    ({"r_norm": "2", "measure": "plane"}, 1.0),
    ({"r_norm": "inf"}, 2.0),
])
def test_convolution_rows(params, expected):
    report = run_experiment("convolution", params)
    assert report.passed, report.failures()
    assert report.fit.slope == pytest.approx(expected, abs=0.1)


@pytest.mark.slow
def test_packets_run_exports_coefficients(tmp_path):
    report = run_experiment("packets", {"R_ladder": "64,128"})
    paths = report.write(str(tmp_path))
    payload = json.loads(paths["coefficients"].read_text())
    assert payload["R"] == 128.0
    magnitudes = [row["abs_coefficient"] for row in payload["top"]]
    assert magnitudes and magnitudes == sorted(magnitudes, reverse=True)
