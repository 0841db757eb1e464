"""Command-line entry point: one subcommand per experiment plus ``selftest``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import COMMANDS, ConfigError, build_config
from .selftest import selftest


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdmimo", description="Spatial Sigma-Delta massive MIMO experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="YAML or JSON file of ExperimentConfig fields")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", type=Path, help="write the table here instead of stdout")
        s.add_argument("--trials", type=int)
        s.add_argument("--preset", choices=("desk", "full"))
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--workers", type=int)
    sub.add_parser("selftest")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "selftest":
        return 0 if selftest() else 1
    try:
        cfg = build_config(args.command, args.config, args.preset, seed=args.seed,
                           trials=args.trials, workers=args.workers)
        table = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    text = table.render(args.format)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
