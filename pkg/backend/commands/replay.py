"""
commands/replay.py - `replay` command

    replay --log <file> [--verbose]

Prints one state digest per tick (the full state JSON with --verbose) and
checks the final one against the digest stored in GameOver.
"""

import argparse

from tools.business_logic.evaluation_flow import replay_digests
from tools.eventlog.event_log import read_log


def register(subparsers) -> None:
    parser = subparsers.add_parser("replay", help="replay a log and print per-tick state digests")
    parser.add_argument("--log", required=True, help="event log file")
    parser.add_argument("--verbose", action="store_true", help="print full per-tick state")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    log = read_log(args.log)
    for line in replay_digests(log, verbose=args.verbose):
        print(line)
    return 0
