"""Command-line entry point.

Subcommands mirror the experiment drivers; a JSON config file supplies
defaults and explicit flags override file values.  Exit codes: 0 on
success, 2 on configuration/validation errors, 3 when a requested
reconstruction fails to reach the discrepancy level.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import ConfigurationError
from .experiments import ExperimentConfig, run_reconstruct, run_simulate, run_table1, run_table2

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3

_FLAG_FIELDS = {
    "n_elements": ("--n-elements", int, "number of mesh elements"),
    "m_knots": ("--m-knots", int, "number of knot intervals for the friction law"),
    "time_horizon": ("--time-horizon", float, "experiment duration"),
    "noise_level": ("--noise-level", float, "noise level for single reconstructions"),
    "seed": ("--seed", int, "noise seed for single reconstructions"),
    "alpha0": ("--alpha0", float, "initial regularization weight"),
    "alpha_decay": ("--alpha-decay", float, "geometric decay of the regularization weight"),
    "out_dir": ("--out-dir", str, "output directory"),
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None,
                        help="JSON file with ExperimentConfig fields")
    for dest, (flag, typ, help_text) in _FLAG_FIELDS.items():
        parser.add_argument(flag, dest=dest, type=typ, default=None, help=help_text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frictionid",
        description="Simulate the damped pipe-flow model and reconstruct its friction law")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write flux and pressure-drop series for one horizon")
    _add_common(p)
    p.add_argument("--export-trajectory", action="store_true",
                   help="also write the full pressure/flux trajectory")

    p = sub.add_parser("table1", help="transient-to-steady proximity over all horizons")
    _add_common(p)

    p = sub.add_parser("table2", help="reconstruction errors over the noise x horizon grid")
    _add_common(p)

    p = sub.add_parser("reconstruct", help="single reconstruction with comparison curves")
    _add_common(p)

    p = sub.add_parser("selftest", help="quick adjoint/gradient/energy checks")
    _add_common(p)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc
        known = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for dest in _FLAG_FIELDS:
        flag_value = getattr(args, dest, None)
        if flag_value is not None:
            values[dest] = flag_value
    if getattr(args, "export_trajectory", False):
        values["export_trajectory"] = True
    for key in ("horizons", "noise_levels"):
        if key in values:
            values[key] = tuple(values[key])
    return ExperimentConfig(**values)


def _run_selftest(cfg: ExperimentConfig) -> int:
    from .selfcheck import run_selftest

    ok = run_selftest(cfg)
    return EXIT_OK if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigurationError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "simulate":
            run_simulate(cfg)
        elif args.command == "table1":
            run_table1(cfg)
        elif args.command == "table2":
            rows = run_table2(cfg)
            if not all(r["converged"] for r in rows):
                bad = [(r["delta"], r["T"]) for r in rows if not r["converged"]]
                print(f"non-converged cells: {bad}", file=sys.stderr)
                return EXIT_NOT_CONVERGED
        elif args.command == "reconstruct":
            result = run_reconstruct(cfg)
            if not result.converged:
                print("reconstruction did not reach the discrepancy level", file=sys.stderr)
                return EXIT_NOT_CONVERGED
        elif args.command == "selftest":
            return _run_selftest(cfg)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
