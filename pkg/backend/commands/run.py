"""
commands/run.py - `run` command

    run --spec <file> [--seeds a,b,..] [--jobs N]

Plays one game per seed and writes <output_dir>/<seed>.log.
Exit status is 2 if any game aborted.
"""

import argparse
import logging

from auto.auto import ConfigError
from tools.business_logic.evaluation_flow import load_run_spec, run_batch

logger = logging.getLogger("cli")


def parse_seeds(text: str) -> list[int]:
    """
    Raises:
        ConfigError: not a comma-separated list of integers
    """
    try:
        seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--seeds must be comma-separated integers, got '{text}'") from e
    if not seeds:
        raise ConfigError("--seeds is empty")
    return seeds


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="play seeded games and write event logs")
    parser.add_argument("--spec", required=True, help="run spec YAML")
    parser.add_argument("--seeds", help="comma-separated seeds overriding the spec")
    parser.add_argument("--jobs", type=int, default=1, help="games to run in parallel")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    spec = load_run_spec(args.spec)
    seeds = parse_seeds(args.seeds) if args.seeds else None
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    results = run_batch(spec, jobs=args.jobs, seeds=seeds)
    aborted = [r.seed for r in results if not r.ok]
    if aborted:
        logger.error("%d of %d games aborted: seeds %s", len(aborted), len(results), aborted)
        return 2
    return 0
