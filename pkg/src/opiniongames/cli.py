"""Command-line entry points.

Exit codes: 0 success, 1 solver failure, 2 configuration problem.
Diagnostics go to stderr; data and reports go to stdout.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
import yaml

from . import __version__
from . import sim as sim_mod
from .errors import ConfigError, SolverError
from .ilq import ilq_solve
from .scenario import bundled_config_path, load_config
from .stability import format_report, stability_report

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CONFIG = 2


def _resolve_config(path):
    """Accept a filesystem path or the name of a bundled scenario."""
    import os

    if os.path.exists(path):
        return path
    try:
        return bundled_config_path(path)
    except ConfigError:
        raise ConfigError(f"config file not found: {path}")


def cmd_run(args) -> int:
    try:
        config = load_config(_resolve_config(args.config), overrides=args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = sim_mod.run(config)
    csv_path = sim_mod.write_outputs(result, args.out)
    if result.error is not None:
        print(f"solver error after {len(result.log)} steps: {result.error}",
              file=sys.stderr)
        return EXIT_SOLVER
    print(f"wrote {len(result.log)} steps to {csv_path}")
    return EXIT_OK


def cmd_subgame(args) -> int:
    try:
        config = load_config(_resolve_config(args.config), overrides=args.set)
        theta = tuple(int(k) - 1 for k in args.tuple.split(","))
        if len(theta) != config.n_agents:
            raise ConfigError(
                f"tuple needs {config.n_agents} entries, got {len(theta)}")
        for i, opt in enumerate(theta):
            if not 0 <= opt < config.option_counts[i]:
                raise ConfigError(f"option {opt + 1} out of range for agent {i + 1}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sol = ilq_solve(config.x0_joint(), theta, config)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    values = ", ".join(f"player {i + 1}: {sol.v[i][0]:.4f}"
                       for i in range(config.n_agents))
    print(f"subgame {args.tuple}: converged={sol.converged} "
          f"iterations={sol.iterations}")
    print(f"values at start: {values}")
    return EXIT_OK


def _load_values(path):
    try:
        with open(path, "r") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"values file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse values file: {exc}")
    if not isinstance(raw, dict) or "v1" not in raw or "v2" not in raw:
        raise ConfigError("values file must map 'v1' and 'v2' to 2x2 tables")
    v1 = np.asarray(raw["v1"], dtype=float)
    v2 = np.asarray(raw["v2"], dtype=float)
    if v1.shape != (2, 2) or v2.shape != (2, 2):
        raise ConfigError("'v1' and 'v2' must be 2x2 tables")
    return v1, v2


def cmd_stability(args) -> int:
    try:
        v1, v2 = _load_values(args.values)
        zb = [float(s) for s in args.opinions.split(",")] if args.opinions else [0.0] * 4
        if len(zb) != 4:
            raise ConfigError("--opinions needs 4 comma-separated numbers")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = stability_report(v1, v2, np.array(zb[:2]), np.array(zb[2:]),
                              d=args.d, lam=getattr(args, "lambda"))
    print(format_report(report))
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        config = load_config(_resolve_config(args.config), overrides=args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    counts = "x".join(str(c) for c in config.option_counts)
    print(f"config ok: '{config.name}', {config.n_agents} agents, "
          f"{counts} options, {config.sim.steps} steps at dt={config.sim.dt}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opiniongames",
        description="Opinion-driven game-theoretic coordination simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and write the log")
    p_run.add_argument("--config", required=True,
                       help="scenario file or bundled name")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
    p_run.set_defaults(fn=cmd_run)

    p_sub = sub.add_parser("subgame", help="solve a single subgame")
    p_sub.add_argument("--config", required=True)
    p_sub.add_argument("--tuple", required=True,
                       help="1-based option per agent, e.g. 1,2")
    p_sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_sub.set_defaults(fn=cmd_subgame)

    p_stab = sub.add_parser("stability", help="print a stability report")
    p_stab.add_argument("--values", required=True,
                        help="YAML file with 2x2 tables 'v1' and 'v2'")
    p_stab.add_argument("--opinions", default=None,
                        help="nominal opinions z1_1,z1_2,z2_1,z2_2 (default 0)")
    p_stab.add_argument("--d", type=float, default=0.2, help="opinion damping")
    p_stab.add_argument("--lambda", type=float, default=1.0,
                        help="steady-state attention")
    p_stab.set_defaults(fn=cmd_stability)

    p_val = sub.add_parser("validate", help="check a config without running")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_val.set_defaults(fn=cmd_validate)

    p_ver = sub.add_parser("version", help="print the package version")
    p_ver.set_defaults(fn=lambda args: print(__version__) or EXIT_OK)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
