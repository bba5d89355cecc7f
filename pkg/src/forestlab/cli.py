"""Command-line front end: one subcommand per experiment.

Flags may be combined with a JSON config file (--config); explicit flags win
over file values. Exit codes: 0 success, 2 invalid configuration, 3 budget
exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from .errors import ConfigError, ForestLabError
from .experiments import EXPERIMENTS, ExperimentConfig, run

_HELP = {
    "sample": "sample wired-box spanning forests and dump them",
    "resistance": "wired effective resistance across the first bond, by radius",
    "resample-test": "direct vs restrict-then-resample pipeline comparison",
    "cuttime": "two-sided walk cut times and loop-erasure visit counts vs bounds",
    "njl": "bush-joining edge tail sums and their n/m envelope",
    "growth": "closed-tree resistance growth along the ray with cut bounds",
    "recurrence": "escape resistance of the origin tree across box radii",
    "counterexample": "bridge edge law between two wired boxes",
    "kac": "return-time identity on small chains",
}


def _int_tuple(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="JSON file with config fields; flags override it")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--budget-vertices", type=int, default=None,
                        dest="budget_vertices")
    common.add_argument("--out", default=None, dest="out_dir", metavar="DIR")
    common.add_argument("--d", type=int, default=None, help="lattice dimension")
    common.add_argument("--radius", type=int, default=None, help="box radius")
    common.add_argument("--radii", type=_int_tuple, default=None,
                        help="comma-separated box radii")
    common.add_argument("--horizon", type=int, default=None, help="walk horizon")
    common.add_argument("--replicas", type=int, default=None)
    common.add_argument("--ball", type=int, default=None, dest="ball_radius",
                        help="ball radius for the resample test")
    common.add_argument("--n-values", type=_int_tuple, default=None, dest="n_values",
                        help="comma-separated n values for cut-time bounds")
    common.add_argument("--anchor", type=int, default=None,
                        help="ray anchor index for join-count tails")
    common.add_argument("--m-max", type=int, default=None, dest="m_max",
                        help="largest tail offset m for join-count tails")
    common.add_argument("--truncation", type=float, default=None,
                        help="fraction of the ray dropped near the root")
    common.add_argument("--z-truncation", type=int, default=None, dest="z_truncation",
                        help="heat-kernel truncation T for the Z bounds")
    common.add_argument("--no-plot", action="store_false", default=None, dest="plot")
    common.add_argument("--no-dump", action="store_false", default=None,
                        dest="dump_forests", help="skip per-replica forest dumps")

    parser = argparse.ArgumentParser(
        prog="forestlab",
        description="spanning forest sampling, resistance bounds, and "
                    "resampling-identity experiments")
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=_HELP[name])
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    values: dict = {}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{args.config} is not valid JSON: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config", "config file must hold a JSON object")
        for key, val in loaded.items():
            if key not in known:
                raise ConfigError(key, "unknown config field")
            values[key] = tuple(val) if isinstance(val, list) else val
    for key in known:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values["experiment"] = args.experiment
    defaults = ExperimentConfig(experiment=args.experiment)
    merged = {k: values.get(k, getattr(defaults, k)) for k in known}
    return ExperimentConfig(**merged)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except ForestLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
