"""
commands/verify.py - `verify` command

    verify --log <file> --extractor structured|model [--spec <file>] [--map <file>]

Writes <seed>.claims and <seed>.verdicts next to the log. The model
extractor reads its endpoint (extraction_model) from the run spec.
"""

import argparse

from tools.business_logic.evaluation_flow import load_run_spec, verify_log


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify", help="extract and verify the claims of a log")
    parser.add_argument("--log", required=True, help="event log file")
    parser.add_argument("--extractor", choices=("structured", "model"), default="structured")
    parser.add_argument("--spec", help="run spec with models / evaluation settings")
    parser.add_argument("--map", help="map YAML the game was played on (default map otherwise)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    spec = load_run_spec(args.spec) if args.spec else None
    claims, verdicts = verify_log(args.log, extractor=args.extractor, spec=spec, map_path=args.map)
    counts: dict[str, int] = {}
    for verdict in verdicts:
        counts[verdict.result] = counts.get(verdict.result, 0) + 1
    summary = ", ".join(f"{k}={counts[k]}" for k in sorted(counts)) or "no claims"
    print(f"{args.log}: {len(claims)} claims ({summary})")
    return 0
