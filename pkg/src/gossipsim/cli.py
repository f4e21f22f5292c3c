"""Command line entry point: ``gossipsim run`` and ``gossipsim sweep``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional

from . import config as cfgmod
from .harness import aggregate, config_comments, format_aggregate, run_one, sweep
from .metrics import ReconcileError, csv_header


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value scenario file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    common.add_argument("--out", metavar="PATH", help="CSV output file (default: stdout for run)")
    common.add_argument("--trace", metavar="PATH", help="write the event trace here")
    common.add_argument("--verbose", action="store_true",
                        help="extra CSV columns and progress logging")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")

    parser = argparse.ArgumentParser(
        prog="gossipsim", description="Simulate gossip routing scenarios and write CSV rows.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate one scenario and print its row")
    sw = sub.add_parser("sweep", parents=[common], help="run a full sweep into a CSV file")
    sw.add_argument("--axis", choices=cfgmod.AXES, required=True)
    sw.add_argument("--values", help="comma separated axis values (default from config)")
    sw.add_argument("--summary", metavar="PATH",
                    help="also write per-point mean and 95%% CI here")
    return parser


def effective_config(args) -> cfgmod.ScenarioConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.ScenarioConfig()
    pairs = []
    for item in args.overrides:
        if "=" not in item:
            raise cfgmod.ConfigError([f"--set expects KEY=VALUE, got {item!r}"])
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value))
    if args.seed is not None:
        pairs.append(("seed", str(args.seed)))
    cfg = cfgmod.parse_pairs(pairs, cfg, where="--set ")
    cfg.validate()
    return cfg


def _run(cfg, args) -> int:
    trace = open(args.trace, "w") if args.trace else None
    try:
        row = run_one(cfg, trace)
    finally:
        if trace is not None:
            trace.close()
    lines = config_comments(cfg) + [csv_header(args.verbose), row.csv_line(args.verbose)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _sweep(cfg, args) -> int:
    if not args.out:
        print("sweep needs --out", file=sys.stderr)
        return 2
    if args.trace:
        print("--trace is only supported for single runs", file=sys.stderr)
        return 2
    values = cfgmod.parse_axis(args.values) if args.values else None
    rows = sweep(cfg, args.axis, args.out, values, verbose=args.verbose)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(format_aggregate(aggregate(rows, args.axis)) + "\n")
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = effective_config(args)
    except cfgmod.ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            return _run(cfg, args)
        return _sweep(cfg, args)
    except ReconcileError as exc:
        print(f"reconcile failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
