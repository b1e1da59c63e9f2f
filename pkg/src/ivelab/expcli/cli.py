"""``ivelab <command> --config PATH [--seed-offset N] [--out DIR]``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .experiments import COMMANDS

log = logging.getLogger("ivelab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ivelab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="key = value config file")
    parser.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config, experiment=args.command, out=args.out)
        cfg = cfg.with_seed_offset(args.seed_offset)
    except ConfigError as exc:
        print(f"ivelab: config error: {exc}", file=sys.stderr)
        return 1
    try:
        written = COMMANDS[args.command](cfg)
    except Exception as exc:  # noqa: BLE001 - any failure maps to exit code 2
        log.exception("run failed")
        print(f"ivelab: {args.command} failed: {exc}", file=sys.stderr)
        return 2
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
