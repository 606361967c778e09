"""Command-line entry point: ``dyadic run|sweep|verify``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (overrides output_dir in the config)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    parser = argparse.ArgumentParser(prog="dyadic", description="Forced dyadic shell model: runs, sweeps, checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="integrate one configuration")
    run.add_argument("config")
    sweep = sub.add_parser("sweep", parents=[common], help="cartesian sweep over f0, n_shells, g, seed")
    sweep.add_argument("config")
    verify = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    verify.add_argument("--tier", choices=("fast", "full"), default="fast")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        from .verify import cmd_verify

        return cmd_verify(args.tier, quiet=args.quiet)
    from .runner import cmd_run, cmd_sweep

    cmd = cmd_run if args.command == "run" else cmd_sweep
    return cmd(args.config, out=args.out, quiet=args.quiet)


if __name__ == "__main__":
    sys.exit(main())
