"""Command line entry point: ``fedimb run|validate <config>``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import FedImbError
from .runner import load_config, run_experiment, write_results


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedimb", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment config and write its CSV tables")
    run.add_argument("config")
    run.add_argument("--output", help="output directory (overrides the config's output key)")
    run.add_argument("--threads", type=int, default=1, help="max seeds run concurrently")

    val = sub.add_parser("validate", help="parse and validate a config without running it")
    val.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {cfg.kind}")
            for key in sorted(cfg.values):
                print(f"  {key} = {cfg.values[key]!r}")
            return 0
        if args.threads < 1:
            raise FedImbError("--threads must be >= 1")
        tables = run_experiment(cfg, threads=args.threads)
        for path in write_results(cfg, tables, args.output):
            print(path)
        return 0
    except (FedImbError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
