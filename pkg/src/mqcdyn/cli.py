"""Command line interface.

    mqcdyn run [CONFIG] [--preset NAME] [--method M] [--set key=value ...]
               [--out DIR] [--workers K]
    mqcdyn compare DIR [DIR ...]
    mqcdyn presets

Exit codes: 0 success, 1 configuration error, 2 solver error.
"""

from __future__ import annotations

import argparse
import sys

from .config import (ConfigError, PRESET_PROVENANCE, PRESETS, load_config)
from .dynamics import EnergyDriftError, NonFiniteDerivativeError
from .regularization import GridCoverageError
from .runner import IncompatibleRunsError, compare, run


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if "." not in key:
            key = "run." + key
        out[key] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mqcdyn",
        description="Mixed quantum-classical particle dynamics benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one simulation run")
    p_run.add_argument("config", nargs="?", default=None,
                       help="INI config file (optional when --preset is given)")
    p_run.add_argument("--preset", default=None,
                       help="built-in benchmark preset to start from")
    p_run.add_argument("--method", default=None,
                       help="koopmon | ehrenfest | bohmion | soft")
    p_run.add_argument("--set", dest="assignments", action="append",
                       metavar="KEY=VALUE",
                       help="override a config key (section.key=value; "
                            "bare keys mean the [run] section)")
    p_run.add_argument("--out", default="run_output",
                       help="output directory (default: run_output)")
    p_run.add_argument("--workers", type=int, default=None,
                       help="worker-count hint recorded in the manifest; "
                            "results are independent of it")

    p_cmp = sub.add_parser("compare", help="compare completed run directories")
    p_cmp.add_argument("dirs", nargs="+", help="two or more run directories")

    sub.add_parser("presets", help="list built-in presets")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "presets":
        for name in sorted(PRESETS):
            print(f"{name}: {PRESET_PROVENANCE[name]}")
            keys = PRESETS[name]
            print(f"    N={keys['run.n_particles']} alpha={keys['run.alpha']} "
                  f"dt={keys['run.dt']} t_final={keys['run.t_final']} "
                  f"snapshots={list(keys['run.snapshot_times'])}")
        return 0

    if args.command == "compare":
        try:
            report = compare(args.dirs)
        except (IncompatibleRunsError, ValueError, OSError) as err:
            print(f"compare error: {err}", file=sys.stderr)
            return 1
        print(report.format_text())
        return 0

    # run
    try:
        overrides = _parse_set(args.assignments)
        if args.method is not None:
            overrides["run.method"] = args.method
        if args.workers is not None:
            overrides["run.workers"] = args.workers
        if args.config is None and args.preset is None:
            raise ConfigError("provide a config file or --preset")
        cfg = load_config(args.config, preset=args.preset, overrides=overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1

    try:
        result = run(cfg, args.out)
    except (EnergyDriftError, NonFiniteDerivativeError, GridCoverageError) as err:
        print(f"solver error: {err}", file=sys.stderr)
        return 2
    print(f"run completed: {result.out_dir}")
    for key in ("final_p1", "final_purity", "max_energy_drift_rel"):
        print(f"  {key} = {result.summary[key]:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
