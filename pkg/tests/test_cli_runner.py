import json

import pytest

from execution.cli_runner import load_config, main, parse_params
from tools.lab_errors import EXIT_INFEASIBLE, EXIT_INVALID_CONFIG, EXIT_OK, EXIT_VERDICT_FAILURE, InvalidInputError


def _config(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_parse_params():
    assert parse_params(["alpha=3/2", " q = inf "]) == {"alpha": "3/2", "q": "inf"}
    with pytest.raises(InvalidInputError):
        parse_params(["alpha"])


def test_load_config_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        load_config(str(tmp_path / "missing.json"))
    with pytest.raises(InvalidInputError):
        load_config(_config(tmp_path, {"experiment": "knapp", "colour": "blue"}))
    with pytest.raises(InvalidInputError):
        load_config(_config(tmp_path, {"params": [1, 2]}))
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(InvalidInputError):
        load_config(str(broken))


def test_exponents_command(tmp_path, capsys):
    code = main(["exponents", "--n", "2", "--alpha-grid", "1/2:3:1/2", "--q-grid", "2,inf", "--out", str(tmp_path)])
    assert code == EXIT_OK
    assert (tmp_path / "exponents_n2.csv").exists()
    assert "alpha" in capsys.readouterr().out


def test_experiment_command_writes_report(tmp_path, capsys):
    code = main(["experiment", "beta_recursion", "--param", "count=5", "--out", str(tmp_path)])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "beta_recursion_report.json").read_text())
    assert report["verdict"] == "CONSISTENT"
    assert json.loads(capsys.readouterr().out)["experiment"] == "beta_recursion"


def test_failed_check_exits_one(tmp_path):
    code = main(["experiment", "oracle", "--param", "points=2", "--param", "tolerance=-1", "--out", str(tmp_path)])
    assert code == EXIT_VERDICT_FAILURE
    failures = json.loads((tmp_path / "failures.json").read_text())["failures"]
    assert failures[0]["name"] == "relative_error"


def test_unknown_parameter_exits_two(tmp_path):
    assert main(["experiment", "oracle", "--param", "colour=blue", "--out", str(tmp_path)]) == EXIT_INVALID_CONFIG


def test_infeasible_request_exits_three(tmp_path):
    code = main(["experiment", "lattice", "--param", "kind=high", "--param", "n=3", "--param", "alpha=7/2",
                 "--param", "R_ladder=4:7", "--param", "cells_per_axis=64", "--out", str(tmp_path)])
    assert code == EXIT_INFEASIBLE


def test_run_needs_config(tmp_path):
    assert main(["run", "--out", str(tmp_path)]) == EXIT_INVALID_CONFIG
    config = _config(tmp_path, {"params": {"count": 5}})
    assert main(["run", "--config", config, "--out", str(tmp_path)]) == EXIT_INVALID_CONFIG


def test_run_from_config(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, {"experiment": "beta_recursion", "params": {"count": 5}, "seed": 3,
                                "out": str(out)})
    assert main(["run", "--config", config]) == EXIT_OK
    report = json.loads((out / "beta_recursion_report.json").read_text())
    assert report["config"]["seed"] == 3


def test_report_reruns_from_embedded_config(tmp_path):
    first = tmp_path / "first"
    assert main(["experiment", "beta_recursion", "--param", "count=5", "--seed", "4", "--out", str(first)]) == EXIT_OK
    report_path = first / "beta_recursion_report.json"
    second = tmp_path / "second"
    assert main(["run", "--config", str(report_path), "--out", str(second)]) == EXIT_OK
    assert (second / "beta_recursion_report.json").read_text() == report_path.read_text()


def test_command_line_overrides_config(tmp_path):
    config = _config(tmp_path, {"experiment": "beta_recursion", "params": {"count": 5}, "seed": 3})
    assert main(["run", "--config", config, "--seed", "11", "--out", str(tmp_path)]) == EXIT_OK
    report = json.loads((tmp_path / "beta_recursion_report.json").read_text())
    assert report["config"]["seed"] == 11


def test_measure_audit_command(tmp_path):
    code = main(["measure-audit", "--family", "cantor", "--alpha", "1.5", "--depth", "4", "--trials", "8",
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "audit_cantor_n2.json").read_text())
    assert payload["measure"]["atoms"] == 256
    assert payload["reload_exact"] is True
    assert (tmp_path / "measure_cantor_n2.csv").exists()


def test_goldens_command_round_trip(tmp_path):
    root = str(tmp_path / "goldens")
    assert main(["goldens", "exponents", "--root", root, "--out", str(tmp_path)]) == EXIT_OK
    assert main(["goldens", "exponents", "--check", "--root", root, "--out", str(tmp_path)]) == EXIT_OK


def test_argument_errors():
    assert main(["teleport"]) == EXIT_INVALID_CONFIG
    assert main(["exponents", "--help"]) == EXIT_OK


def test_whitney_run_exports_caps_and_field(tmp_path):
    code = main(["experiment", "whitney", "--param", "R=16", "--param", "depth=3", "--out", str(tmp_path)])
    assert code == EXIT_OK
    caps = json.loads((tmp_path / "whitney_caps.json").read_text())
    assert caps["caps"] and all(cap["level"] == caps["caps"][0]["level"] for cap in caps["caps"])
    field = (tmp_path / "whitney_field.csv").read_text().splitlines()
    assert field[0].startswith("x0,x1,x2")
    assert len(field) == 1 + 4 ** 3
