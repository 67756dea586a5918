#!/bin/env python3
"""
fermion-steer command line.

    fermion-steer <experiment> [--config FILE] [--set key=value ...] [--seed N]
                  [--out DIR] [--threads N] [--paper-scale] [--mode-cache DIR]
                  [--no-progress]

Exit status: 0 on success, 1 when checks or trajectories fail, 2 on a
configuration error.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence

from . import __version__
from .config import RunConfig, paper_scale, parse_config, resolve_threads
from .errors import ConfigError, FermionSteerError
from .experiments import RUNNERS, run

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"

#sections carrying a master seed
SEEDED_SECTIONS = ("protocol", "symmetry", "povm", "selftest")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="JSON configuration file, '-' for stdin")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration value, e.g. protocol.L=16 (repeatable)")
    common.add_argument("--seed", type=int, help="master seed for every random section")
    common.add_argument("--out", "-o", help="output directory")
    common.add_argument("--threads", "-j", type=int, help="worker processes for trajectory ensembles")
    common.add_argument("--paper-scale", "--large-scale", dest="paper_scale", action="store_true",
                        help="L = 20, n_shell = 5, 100 trajectories")
    common.add_argument("--mode-cache", help="directory for cached OW mode sets")
    common.add_argument("--no-progress", action="store_true", help="disable progress bars")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])

    parser = argparse.ArgumentParser(prog="fermion-steer",
                                     description="Gaussian simulation of adaptive Chern insulator steering")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--emit-schema", action="store_true", help="print the configuration JSON schema and exit")
    sub = parser.add_subparsers(dest="command", metavar="EXPERIMENT")
    for name in RUNNERS:
        sub.add_parser(name, parents=[common], help=f"run the {name} experiment")
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format=LOG_FORMAT)


def _collect_overrides(args: argparse.Namespace) -> List[str]:
    overrides = [f"experiment={json.dumps(args.command)}"]
    overrides.extend(args.overrides)
    if args.seed is not None:
        overrides.extend(f"{section}.seed={args.seed}" for section in SEEDED_SECTIONS)
    if args.out is not None:
        overrides.append(f"output_dir={json.dumps(args.out)}")
    if args.mode_cache is not None:
        overrides.append(f"mode_cache={json.dumps(args.mode_cache)}")
    if args.no_progress:
        overrides.append("progress=false")
    return overrides


def load_config(args: argparse.Namespace) -> RunConfig:
    config = parse_config(args.config, _collect_overrides(args))
    if args.paper_scale:
        config = paper_scale(config)
    return config


def main(argv: Optional[Sequence[str]]=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.emit_schema:
        print(json.dumps(RunConfig.model_json_schema(), indent=2))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG

    configure_logging(args.log_level)
    try:
        config = load_config(args)
        n_jobs = resolve_threads(args.threads, config)
    except ConfigError as e:
        print(f"fermion-steer: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return run(config, n_jobs=n_jobs)
    except FermionSteerError as e:
        _logger.error("%s failed: %s", config.experiment, e)
        return EXIT_FAILED
    except (ArithmeticError, ValueError) as e:
        _logger.exception("%s failed: %s", config.experiment, e)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
