"""Command line entry point: ``phi4torus <verb> [options]``.

Exit status is 0 iff every verdict of the run passes (runs without
statistical checks exit 0), 2 on configuration errors or unreadable inputs.
"""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .calibration import calibrate, fixture_path
from .config import VERBS, Config, ConfigError, load_config, parse_overrides, schema_text
from .harness import report, run
from .stats import all_passed, format_reports


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key-value configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--output", help="output directory (default: run.output or $PHI4_OUTPUT_DIR)")
    p.add_argument("--seed", type=int, help="shortcut for --set run.seed=...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phi4torus", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb, help=f"run the {verb} experiment")
        _common(p)
        if verb == "renorm-constants":
            p.add_argument("--N", type=int, nargs="+", help="Galerkin level(s)")
            p.add_argument("--m0", type=float, help="mass")
        elif verb == "trees":
            p.add_argument("--snapshot-every", type=int, help="steps between snapshots")
        elif verb == "besov":
            p.add_argument("snapshot", nargs="?", help="binary field snapshot")
    p = sub.add_parser("run", help="run the verb named in a configuration file")
    p.add_argument("config_file")
    p.add_argument("--output")
    p = sub.add_parser("report", help="tabulate reports of a run directory or a samples CSV")
    p.add_argument("path")
    p.add_argument("--threshold", type=float, default=4.0, help="|z| threshold for samples CSV input")
    p = sub.add_parser("calibrate", help="regenerate the frozen inequality constants")
    p.add_argument("--seed", type=int, default=20240)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--path", help=f"fixture to write (default {fixture_path()})")
    sub.add_parser("config-schema", help="print every configuration key with its default")
    return parser


def _config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    overrides = parse_overrides(args.set)
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if getattr(args, "m0", None) is not None:
        overrides["sim.m0"] = args.m0
    if getattr(args, "snapshot_every", None) is not None:
        overrides["trees.snapshot_every"] = args.snapshot_every
    return cfg.with_overrides(overrides)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "config-schema":
            print(schema_text())
            return 0
        if args.verb == "calibrate":
            data = calibrate(args.seed, args.trials, args.path or fixture_path())
            for name, value in sorted(data["ceiling"].items()):
                print(f"{name}: observed max {data['observed_max'][name]:.6g}, ceiling {value:.6g}")
            return 0
        if args.verb == "report":
            reports, text = report(args.path, args.threshold)
            print(text)
            return 0 if all_passed(reports) else 1
        if args.verb == "run":
            result = run(load_config(args.config_file), output=args.output)
        else:
            extra = {}
            if args.verb == "renorm-constants" and args.N:
                extra["Ns"] = args.N
            if args.verb == "besov" and args.snapshot:
                extra["snapshot"] = args.snapshot
            result = run(_config(args), args.verb, args.output, **extra)
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    if args.verb == "besov" or (args.verb == "run" and result.verb == "besov"):
        sys.stdout.write((result.output / "besov.csv").read_text())
    if result.reports:
        print(format_reports(result.reports))
    print(f"outputs written to {result.output}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
