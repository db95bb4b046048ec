#!/usr/bin/env python3
"""
Artifact Store - Deterministic writers and readers for run outputs
Part of Layer 3: Tools (deterministic operations)
Architecture SOP: architecture/00_master_system.md

Everything written here is byte-stable for identical inputs: floats go
out as repr (tables) or float.hex (measures), JSON keys are sorted and
nothing time-dependent enters the compared files.
"""

import os
import sys
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.fractal_measures import AtomicMeasure
from tools.lab_errors import InvalidInputError
from tools.lab_logging import get_logger

load_dotenv()

logger = get_logger(__name__)

OUTPUT_DIR_ENV = "CFL_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = ".tmp/runs"
GOLDEN_DIR = "goldens"
MEASURE_HEADER_KEYS = ("ambient", "alpha", "support_radius", "resolution", "seed", "label", "axisymmetric")


def output_dir(out: Optional[str] = None) -> Path:
    """Resolve the output directory: explicit argument, then CFL_OUTPUT_DIR, then .tmp/runs."""
    path = Path(out or os.getenv(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def artifact_path(out: Optional[str], name: str, suffix: str) -> Path:
    """
    Path for one artifact.

    Args:
        out: Output directory (None for the default)
        name: Artifact stem, e.g. "knapp_n2"
        suffix: File suffix including the dot

    Returns:
        Path inside the output directory
    """
    safe = name.replace("/", "_").replace("\\", "_").replace(" ", "_")
    return output_dir(out) / f"{safe}{suffix}"


def _canonical(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_canonical(v) for v in value.tolist()]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if value != value or value in (float("inf"), float("-inf")):
            return repr(value)
        return value
    if hasattr(value, "value") and hasattr(value, "name"):
        return value.value
    return value


def dumps_json(payload: Dict) -> str:
    return json.dumps(_canonical(payload), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, payload: Dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(payload))
    logger.debug("artifact_written", path=str(path), kind="json")
    return path


def read_json(path: Path) -> Dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InvalidInputError(f"no such file: {path}")
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"{path} is not valid JSON: {e}")


def _repr_frame(frame: pd.DataFrame) -> pd.DataFrame:
    out = frame.copy()
    for column in out.columns:
        if pd.api.types.is_float_dtype(out[column]):
            out[column] = out[column].map(repr)
    return out


def write_table(path: Path, frame: pd.DataFrame, header_lines: Sequence[str] = ()) -> Path:
    """CSV with repr floats and optional '#' header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = _repr_frame(frame).to_csv(index=False, lineterminator="\n")
    head = "".join(f"# {line}\n" for line in header_lines)
    path.write_text(head + body)
    logger.debug("artifact_written", path=str(path), kind="csv", rows=len(frame))
    return path


def ladder_frame(scales: Sequence[float], ratios: Sequence[float], variable: str = "R") -> pd.DataFrame:
    scales = np.asarray(scales, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    return pd.DataFrame({
        variable: scales,
        "ratio": ratios,
        f"log2{variable}": np.log2(scales),
        "log2ratio": np.log2(ratios),
    })


def write_ladder(out: Optional[str], name: str, scales, ratios, variable: str = "R") -> Dict[str, Path]:
    """
    Ladder CSV plus the two-column plot-data file.

    Args:
        out: Output directory
        name: Artifact stem
        scales: R (or rho) values
        ratios: Measured ratios
        variable: Column name for the scale

    Returns:
        {"csv": path, "plot": path}
    """
    frame = ladder_frame(scales, ratios, variable)
    csv_path = write_table(artifact_path(out, name, ".csv"), frame)
    plot_path = artifact_path(out, name, ".dat")
    lines = [f"{repr(float(a))} {repr(float(b))}" for a, b in zip(frame[f"log2{variable}"], frame["log2ratio"])]
    plot_path.write_text("\n".join(lines) + "\n")
    return {"csv": csv_path, "plot": plot_path}


def write_field(out: Optional[str], name: str, points: np.ndarray, values: np.ndarray) -> Path:
    """Spatial field as x0..xd, real, imag in atom order."""
    points = np.atleast_2d(points)
    frame = pd.DataFrame(points, columns=[f"x{i}" for i in range(points.shape[1])])
    frame["real"] = np.real(values)
    frame["imag"] = np.imag(values)
    return write_table(artifact_path(out, name, ".csv"), frame)


# --- measures ---------------------------------------------------------------------

def save_measure(mu: AtomicMeasure, path: Path) -> Path:
    """
    Write a materialized measure bit-exactly (float.hex coordinates and weights).

    Args:
        mu: Measure with atoms
        path: Target CSV

    Returns:
        path
    """
    if not mu.materialized:
        raise InvalidInputError("only materialized measures can be saved")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = mu.points.shape[1]
    header = {
        "ambient": d, "alpha": float(mu.alpha_claimed).hex(), "support_radius": float(mu.support_radius).hex(),
        "resolution": float(mu.resolution).hex(), "seed": "" if mu.seed is None else mu.seed,
        "label": mu.label, "axisymmetric": int(mu.axisymmetric),
    }
    columns = [f"x{i}" for i in range(d)] + ["weight"]
    rows = [",".join(columns)]
    for point, weight in zip(mu.points, mu.weights):
        rows.append(",".join([float(c).hex() for c in point] + [float(weight).hex()]))
    lines = [f"# {key}={header[key]}" for key in MEASURE_HEADER_KEYS]
    path.write_text("\n".join(lines + rows) + "\n")
    logger.info("measure_saved", path=str(path), atoms=mu.atom_count)
    return path


def load_measure(path: Path) -> AtomicMeasure:
    """Inverse of save_measure."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"no such measure file: {path}")
    header = {}
    with open(path, "r") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
    missing = [k for k in MEASURE_HEADER_KEYS if k not in header]
    if missing:
        raise InvalidInputError(f"measure file {path} lacks header keys {missing}")
    frame = pd.read_csv(path, comment="#", dtype=str)
    d = int(header["ambient"])
    coords = np.array([[float.fromhex(v) for v in frame[f"x{i}"]] for i in range(d)]).T.reshape(-1, d)
    weights = np.array([float.fromhex(v) for v in frame["weight"]])
    return AtomicMeasure(
        points=coords, weights=weights,
        alpha_claimed=float.fromhex(header["alpha"]),
        support_radius=float.fromhex(header["support_radius"]),
        resolution=float.fromhex(header["resolution"]),
        seed=int(header["seed"]) if header["seed"] else None,
        label=header["label"], axisymmetric=bool(int(header["axisymmetric"])),
    )


# --- goldens ------------------------------------------------------------------------

def golden_path(suite: str, root: Optional[str] = None) -> Path:
    base = Path(root) if root else Path(__file__).resolve().parent.parent / GOLDEN_DIR
    base.mkdir(parents=True, exist_ok=True)
    return base / f"{suite}.csv"


def write_golden(suite: str, frame: pd.DataFrame, generator: str, root: Optional[str] = None) -> Path:
    """Golden table with a provenance header; rewriting identical content leaves the file untouched."""
    path = golden_path(suite, root)
    header = [f"suite={suite}", f"generator={generator}"]
    body = "".join(f"# {line}\n" for line in header) + _repr_frame(frame).to_csv(index=False, lineterminator="\n")
    if path.exists() and path.read_text() == body:
        logger.info("golden_unchanged", suite=suite, path=str(path))
        return path
    path.write_text(body)
    logger.info("golden_written", suite=suite, path=str(path), rows=len(frame))
    return path


def read_golden(suite: str, root: Optional[str] = None) -> pd.DataFrame:
    path = golden_path(suite, root)
    if not path.exists():
        raise InvalidInputError(f"golden file for suite {suite!r} not found at {path}")
    return pd.read_csv(path, comment="#", dtype=str)


def list_artifacts(out: Optional[str] = None) -> List[str]:
    return sorted(p.name for p in output_dir(out).iterdir() if p.is_file())


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="Inspect run artifacts")
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    for name in list_artifacts(args.out):
        print(name)
