#!/usr/bin/env python3
"""
CLI Runner - command-line entry point for the fractal Strichartz lab

Subcommands: exponents, measure-audit, experiment, packets, wave, goldens
and run (a JSON config). Settings resolve as command line > config file >
environment (CFL_*) > built-in defaults. Exit status: 0 all checks passed,
1 a verdict or check failed (failures.json written), 2 invalid input or
config, 3 infeasible at the requested resolution.

Directive: directives/MASTER_ORCHESTRATION.md
"""

import os
import sys
import json
import argparse
from typing import Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from tools.artifact_store import (
    artifact_path, dumps_json, load_measure, output_dir, save_measure, write_json, write_table,
)
from tools.exponents import exponent_table, parse_grid
from tools.fractal_measures import (
    estimate_growth_constant, make_cantor, make_delta_product, make_lebesgue_ball,
    make_plate_union_measure, make_radial_power, measure_summary,
)
from tools.lab_errors import (
    EXIT_INVALID_CONFIG, EXIT_OK, EXIT_VERDICT_FAILURE, InvalidInputError, LabError, exit_code_for,
)
from tools.lab_logging import configure_logging, get_logger
from execution.experiments import EXPERIMENTS, ExperimentReport, run_experiment
from execution.goldens import SUITES, compare_golden, generate_golden

load_dotenv()

logger = get_logger(__name__)

CONFIG_KEYS = {"experiment", "params", "seed", "out", "jobs", "tolerance"}


def load_config(path: str) -> Dict:
    """
    Read and validate a run config.

    Args:
        path: JSON file with keys experiment, params, seed, out, jobs, tolerance, or a
            report written by an earlier run

    Returns:
        Config dict
    """
    try:
        with open(path, "r") as f:
            config = json.load(f)
    except FileNotFoundError:
        raise InvalidInputError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise InvalidInputError(f"config {path} is not valid JSON: {e}")
    if not isinstance(config, dict):
        raise InvalidInputError(f"config {path} must hold a JSON object")
    # a report file reruns from the config it embeds
    if "verdict" in config and isinstance(config.get("config"), dict):
        config = {k: v for k, v in config["config"].items() if v is not None}
    unknown = sorted(set(config) - CONFIG_KEYS)
    if unknown:
        raise InvalidInputError(f"config {path} has unknown keys {unknown}")
    if "params" in config and not isinstance(config["params"], dict):
        raise InvalidInputError("config params must be an object")
    return config


def parse_params(items: List[str]) -> Dict[str, str]:
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise InvalidInputError(f"--param expects key=value, got {item!r}")
        params[key.strip()] = value.strip()
    return params


def resolve_settings(args: argparse.Namespace, config: Dict) -> Dict:
    """Command line over config file over environment; experiment defaults fill the rest."""
    def pick(name):
        value = getattr(args, name, None)
        return value if value is not None else config.get(name)

    return {
        "seed": pick("seed"),
        "jobs": pick("jobs"),
        "tolerance": pick("tolerance"),
        "out": pick("out") or os.getenv("CFL_OUTPUT_DIR"),
    }


def finish(report: ExperimentReport, out: Optional[str]) -> int:
    """Write the report and, on failure, failures.json; return the exit status."""
    report.write(out)
    print(dumps_json({"experiment": report.experiment, "verdict": report.verdict,
                      "slope": None if report.fit is None else report.fit.slope}), end="")
    if report.passed:
        return EXIT_OK
    write_json(artifact_path(out, "failures", ".json"), {"failures": report.failures()})
    return EXIT_VERDICT_FAILURE


def execute(name: str, params: Dict, settings: Dict) -> int:
    report = run_experiment(name, params, seed=settings["seed"], jobs=settings["jobs"],
                            tolerance=settings["tolerance"])
    return finish(report, settings["out"])


# --- subcommands -----------------------------------------------------------------------

def cmd_exponents(args, settings) -> int:
    table = exponent_table(args.n, parse_grid(args.alpha_grid), parse_grid(args.q_grid))
    path = write_table(artifact_path(settings["out"], f"exponents_n{args.n}", ".csv"), table)
    print(table.to_string(index=False))
    logger.info("exponent_table_written", path=str(path), rows=len(table))
    return EXIT_OK


def build_measure(family: str, n: int, alpha: float, resolution: float, depth: int, R: float):
    if family == "radial":
        return make_radial_power(alpha, n, resolution)
    if family == "lebesgue":
        return make_lebesgue_ball(n, resolution)
    if family == "delta":
        return make_delta_product(alpha, n, resolution)
    if family == "cantor":
        return make_cantor(alpha, n, depth)
    if family == "plate_union":
        return make_plate_union_measure("high" if alpha > n else "mid", alpha, n, R)
    raise InvalidInputError(f"unknown measure family {family!r}")


def cmd_measure_audit(args, settings) -> int:
    mu = build_measure(args.family, args.n, args.alpha, args.resolution, args.depth, args.R)
    seed = 0 if settings["seed"] is None else int(settings["seed"])
    audit = estimate_growth_constant(mu, trials=args.trials, seed=seed)
    payload = {"measure": measure_summary(mu), "audit": audit.as_row(), "seed": seed}
    if mu.materialized:
        # atoms are written as float.hex, so the reload must be bit-exact
        path = save_measure(mu, artifact_path(settings["out"], f"measure_{args.family}_n{args.n}", ".csv"))
        reloaded = load_measure(path)
        payload["measure_file"] = str(path)
        payload["reload_exact"] = bool(np.array_equal(reloaded.points, mu.points)
                                       and np.array_equal(reloaded.weights, mu.weights))
    write_json(artifact_path(settings["out"], f"audit_{args.family}_n{args.n}", ".json"), payload)
    print(dumps_json(payload), end="")
    return EXIT_OK


def cmd_experiment(args, settings) -> int:
    config = args.loaded_config
    params = dict(config.get("params", {})) if config.get("experiment") == args.name else {}
    params.update(parse_params(args.param))
    return execute(args.name, params, settings)


def cmd_packets(args, settings) -> int:
    params = {"R_ladder": args.R_ladder, "n": args.n}
    return execute("packets", params, settings)


def cmd_wave(args, settings) -> int:
    params = {"n": args.n, "alpha": args.alpha, "q": args.q, "data_family": args.data_family,
              "R_ladder": args.R_ladder}
    if args.s is not None:
        params["s"] = args.s
    return execute("wave", params, settings)


def cmd_goldens(args, settings) -> int:
    if args.check:
        problems = compare_golden(args.suite, args.root)
        for line in problems:
            print(line)
        return EXIT_VERDICT_FAILURE if problems else EXIT_OK
    print(generate_golden(args.suite, args.root))
    return EXIT_OK


def cmd_run(args, settings) -> int:
    config = args.loaded_config
    if "experiment" not in config:
        raise InvalidInputError("config needs an 'experiment' key")
    params = dict(config.get("params", {}))
    params.update(parse_params(args.param))
    return execute(config["experiment"], params, settings)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON run config")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="Output directory (CFL_OUTPUT_DIR, then .tmp/runs)")
    common.add_argument("--jobs", type=int, default=None)
    common.add_argument("--tolerance", type=float, default=None)
    common.add_argument("--log-level", default=None)
    common.add_argument("--log-format", choices=["console", "json"], default=None)

    parser = argparse.ArgumentParser(description="Fractal Strichartz lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", parents=[common], help="Exact exponent table")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--alpha-grid", default="1/4:4:1/4")
    p.add_argument("--q-grid", default="2,4,8,inf")
    p.set_defaults(handler=cmd_exponents)

    p = sub.add_parser("measure-audit", parents=[common], help="Build a measure and audit its growth constant")
    p.add_argument("--family", choices=["radial", "lebesgue", "delta", "cantor", "plate_union"], default="radial")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--resolution", type=float, default=0.125)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--R", type=float, default=64.0)
    p.add_argument("--trials", type=int, default=64)
    p.set_defaults(handler=cmd_measure_audit)

    p = sub.add_parser("experiment", parents=[common], help="Run one registered experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--param", action="append", default=[], help="key=value override")
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("packets", parents=[common], help="Wave-packet decomposition checks")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--R-ladder", dest="R_ladder", default="64,128,256")
    p.set_defaults(handler=cmd_packets)

    p = sub.add_parser("wave", parents=[common], help="Wave equation on a fractal measure")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--alpha", default="5/2")
    p.add_argument("--q", default="2")
    p.add_argument("--s", default=None)
    p.add_argument("--data-family", dest="data_family", choices=["focused", "random"], default="focused")
    p.add_argument("--R-ladder", dest="R_ladder", default="2:5")
    p.set_defaults(handler=cmd_wave)

    p = sub.add_parser("goldens", parents=[common], help="Regenerate or check golden tables")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--check", action="store_true")
    p.add_argument("--root", default=None)
    p.set_defaults(handler=cmd_goldens)

    p = sub.add_parser("run", parents=[common], help="Run the experiment named in --config")
    p.add_argument("--param", action="append", default=[], help="key=value override")
    p.set_defaults(handler=cmd_run)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, dispatch and map failures to exit codes.

    Args:
        argv: Argument list (sys.argv[1:] by default)

    Returns:
        Exit status
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_INVALID_CONFIG
    configure_logging(args.log_level, args.log_format)
    try:
        config = load_config(args.config) if args.config else {}
        if args.command == "run" and not config:
            raise InvalidInputError("run needs --config")
        args.loaded_config = config
        settings = resolve_settings(args, config)
        output_dir(settings["out"])
        return args.handler(args, settings)
    except LabError as e:
        logger.error("run_failed", command=args.command, error=str(e), error_type=type(e).__name__)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
