"""``bench`` command line: ``run`` a configured benchmark, ``aggregate`` its results."""
from __future__ import annotations

import argparse
import logging
import sys

from ..metrics import METRIC_NAMES
from .aggregate import aggregate
from .config import ConfigError, load_config
from .runner import run_benchmark


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark configuration")
    run.add_argument("--config", required=True, help="TOML configuration file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=None, help="worker processes")
    run.add_argument("--resume", action="store_true", help="skip units already in the output")

    agg = sub.add_parser("aggregate", help="median and relative-excess tables")
    agg.add_argument("--in", dest="in_dir", required=True, help="results directory or CSV")
    agg.add_argument("--metric", choices=METRIC_NAMES, default="srmse")
    agg.add_argument("--out", required=True, help="excess table CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        try:
            config = load_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
        if args.workers is not None and args.workers < 1:
            print("config error: --workers must be >= 1", file=sys.stderr)
            return 1
        summary = run_benchmark(config, args.out, args.workers, args.resume)
        print(f"{summary.units} units written to {summary.path} "
              f"({summary.failed_units} failed, {summary.skipped_units} resumed)")
        return summary.exit_code
    try:
        result = aggregate(args.in_dir, args.metric, args.out)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    print(f"{len(result)} rows written to {args.out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
