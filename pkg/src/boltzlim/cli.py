"""Command line: boltzlim <subcommand> [--config PATH] [--out DIR] [--workers N] [--override s.k=v]."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import harness
from .config import ConfigError, apply_overrides, defaults, defaults_help, parse_config

COMMANDS = {
    "kernel-check": "check normalization, reciprocity and wall-Maxwellian preservation of wall kernels",
    "kinetic-run": "one slab run with entropy ledger, wall diagnostics and boundary-term bound",
    "fluid-run": "one Navier-Stokes run with energy ledger, Euler comparison and wall-layer monitor",
    "sweep-kinetic": "kinetic runs over [sweep] eps_list with a convergence table",
    "sweep-fluid": "fluid runs over [sweep] eps_list with a convergence table",
    "report": "summarize a run or sweep directory; exit 0 iff every hard invariant held",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="boltzlim",
        description="Kinetic-to-Euler and Navier-Stokes-to-Euler limit diagnostics.",
        epilog="exit codes: 0 success, 1 invariant failure, 2 config error\n\nconfig defaults:\n" + defaults_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in COMMANDS.items():
        s = sub.add_parser(name, help=help_, description=help_)
        if name == "report":
            s.add_argument("run_dir", help="directory written by another subcommand")
            continue
        s.add_argument("--config", type=Path, help="INI file with [kinetic] [fluid] [sweep] [kernel] sections")
        s.add_argument("--out", type=Path, required=True, help="output directory")
        s.add_argument("--workers", type=int, default=1, help="parallel sweep rows (default 1)")
        s.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config key; repeatable")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        return harness.report(args.run_dir)
    try:
        cfg = parse_config(args.config) if args.config else defaults()
        cfg = apply_overrides(cfg, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out
    try:
        if args.command == "kernel-check":
            harness.kernel_check(cfg, out)
        elif args.command == "kinetic-run":
            harness.kinetic_run(cfg, out)
        elif args.command == "fluid-run":
            harness.fluid_run(cfg, out)
        elif args.command == "sweep-kinetic":
            harness.sweep_kinetic(cfg, out, args.workers)
        elif args.command == "sweep-fluid":
            harness.sweep_fluid(cfg, out, args.workers)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return harness.report(out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
