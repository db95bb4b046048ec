import json
import math

import numpy as np
import pandas as pd
import pytest

from tools.artifact_store import (
    artifact_path, dumps_json, golden_path, ladder_frame, list_artifacts, load_measure, output_dir,
    read_golden, read_json, save_measure, write_field, write_golden, write_json, write_ladder, write_table,
)
from tools.exponents import Regime
from tools.fractal_measures import make_cantor, make_delta_product
from tools.lab_errors import InvalidInputError


def test_output_dir_prefers_argument(tmp_path, monkeypatch):
    monkeypatch.setenv("CFL_OUTPUT_DIR", str(tmp_path / "env"))
    assert output_dir(str(tmp_path / "arg")) == tmp_path / "arg"
    assert output_dir() == tmp_path / "env"
    assert (tmp_path / "env").is_dir()


def test_artifact_names_are_sanitized(tmp_path):
    assert artifact_path(str(tmp_path), "knapp n2/R", ".csv").name == "knapp_n2_R.csv"


def test_json_is_sorted_and_plain():
    text = dumps_json({"b": np.float64(0.5), "a": [np.int64(2), math.inf], "c": Regime.MID, "d": np.bool_(True)})
    assert json.loads(text) == {"a": [2, "inf"], "b": 0.5, "c": Regime.MID.value, "d": True}
    assert text.index('"a"') < text.index('"b"')


def test_read_json_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        read_json(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(InvalidInputError):
        read_json(broken)


def test_write_json_round_trip(tmp_path):
    path = write_json(tmp_path / "nested" / "report.json", {"x": 1})
    assert read_json(path) == {"x": 1}


def test_table_uses_repr_floats(tmp_path):
    path = write_table(tmp_path / "t.csv", pd.DataFrame({"v": [0.1, 1 / 3]}), header_lines=["suite=demo"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# suite=demo"
    assert lines[2] == repr(0.1)
    assert lines[3] == repr(1 / 3)


def test_ladder_outputs(tmp_path):
    paths = write_ladder(str(tmp_path), "demo", [32.0, 64.0], [1.0, 2.0], variable="R")
    assert paths["plot"].read_text().splitlines() == ["5.0 0.0", "6.0 1.0"]
    assert list(ladder_frame([32.0], [2.0], "rho").columns) == ["rho", "ratio", "log2rho", "log2ratio"]


def test_write_field_columns(tmp_path):
    path = write_field(str(tmp_path), "field", np.zeros((2, 3)), np.array([1 + 2j, 3 - 1j]))
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x0", "x1", "x2", "real", "imag"]
    assert frame["imag"].tolist() == [2.0, -1.0]


def test_measure_file_is_bit_exact(tmp_path):
    mu = make_cantor(1.5, 2, 3)
    loaded = load_measure(save_measure(mu, tmp_path / "cantor.csv"))
    assert np.array_equal(loaded.points, mu.points)
    assert np.array_equal(loaded.weights, mu.weights)
    assert loaded.alpha_claimed == mu.alpha_claimed
    assert loaded.label == mu.label


def test_measure_file_errors(tmp_path):
    with pytest.raises(InvalidInputError):
        load_measure(tmp_path / "none.csv")
    headless = tmp_path / "headless.csv"
    headless.write_text("x0,weight\n0x0p+0,0x1p+0\n")
    with pytest.raises(InvalidInputError):
        load_measure(headless)


def test_unexpanded_measures_are_not_saved(tmp_path):
    mu = make_delta_product(2.0, 2, 1 / 4, domain="cube")
    mu.materialized = False
    with pytest.raises(InvalidInputError):
        save_measure(mu, tmp_path / "product.csv")


def test_golden_rewrite_is_stable(tmp_path):
    frame = pd.DataFrame({"n": [2, 3], "value": [0.5, float("nan")]})
    path = write_golden("demo", frame, generator="tests", root=str(tmp_path))
    first = path.read_text()
    stamp = path.stat().st_mtime_ns
    write_golden("demo", frame, generator="tests", root=str(tmp_path))
    assert path.read_text() == first
    assert path.stat().st_mtime_ns == stamp
    stored = read_golden("demo", str(tmp_path))
    assert stored["n"].tolist() == ["2", "3"]
    assert golden_path("demo", str(tmp_path)) == path


def test_missing_golden(tmp_path):
    with pytest.raises(InvalidInputError):
        read_golden("absent", str(tmp_path))


def test_list_artifacts(tmp_path):
    write_json(artifact_path(str(tmp_path), "b", ".json"), {})
    write_json(artifact_path(str(tmp_path), "a", ".json"), {})
    assert list_artifacts(str(tmp_path)) == ["a.json", "b.json"]
