#!/usr/bin/env python3
"""freshlab command line: model, simulate, sweep, sketch-bench.

Usage::

    freshlab simulate --config lab.ini --seed 7 --out-dir results
    freshlab sweep --set sim.policies="ttl-expiry invalidate" --workers 4
    freshlab model --set model.staleness_bounds=0.1 --set model.lam=1

EXIT CODES:
- 0 success
- 1 usage or configuration error
- 2 runtime error
- 3 staleness audit found violations

Logs go to stderr; stdout only carries the command summary.
"""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

from . import __version__
from .commands import BaseCommand, CommandResult, command_discovery
from .config import load_arguments
from .errors import ConfigError, LabError

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_RUNTIME = 2

LOG_FORMAT = "[%(name)s] %(levelname)s %(message)s"


class _RaisingParser(argparse.ArgumentParser):
    """ArgumentParser that raises ConfigError instead of exiting with status 2."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _common_flags() -> argparse.ArgumentParser:
    common = _RaisingParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI experiment file")
    common.add_argument("--seed", type=int, help="seed for workload generation and hashing")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--format", choices=("csv", "json", "gnuplot"), help="output format")
    common.add_argument("--workers", type=int, help="worker processes for simulation points")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.FIELD=VALUE",
        help="override one config value (repeatable)",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    return common


def build_parser(commands: Dict[str, BaseCommand]) -> argparse.ArgumentParser:
    parser = _RaisingParser(prog="freshlab", description="Cache freshness laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_RaisingParser)
    subparsers.required = True
    common = _common_flags()
    for name in sorted(commands):
        subparsers.add_parser(name, parents=[common], help=commands[name].description)
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def flag_values(args: argparse.Namespace) -> Dict[Tuple[str, str], Any]:
    """(section, field) -> value for every common flag given on the command line."""
    values: Dict[Tuple[str, str], Any] = {}
    if args.seed is not None:
        for section in ("workload", "sim", "sketch"):
            values[(section, "seed")] = args.seed
    if args.out_dir is not None:
        values[("output", "dir")] = args.out_dir
    if args.format is not None:
        values[("output", "format")] = args.format
    if args.workers is not None:
        values[("sim", "workers")] = args.workers
    return values


async def run_command(command: BaseCommand, args: argparse.Namespace) -> CommandResult:
    arguments = load_arguments(command.input_schema, args.config, args.overrides, flag_values(args))
    return await command.execute(arguments)


def _instantiate() -> Dict[str, BaseCommand]:
    return {name: cls() for name, cls in command_discovery.discover().items()}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command, return the exit code."""
    commands = _instantiate()
    try:
        args = build_parser(commands).parse_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(args.verbose, args.quiet)
    command = commands[args.command]
    try:
        result = asyncio.run(run_command(command, args))
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except LabError as e:
        logger.error("%s", e)
        return EXIT_RUNTIME
    except Exception:
        logger.exception("%s failed", command.name)
        return EXIT_RUNTIME

    for line in result.summary:
        print(line)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
