"""
commands/report.py - `report` command

    report --dir <dir> --group setting|model-role --format table|tsv [--spec <file>]

Per-game <seed>.report.json files plus <dir>/summary.<format>, which is
also printed.
"""

import argparse

from schema.evaluation import EvaluationSettings
from tools.business_logic.evaluation_flow import load_run_spec, report_dir


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="compute metrics and the summary table")
    parser.add_argument("--dir", required=True, help="directory of logs (searched recursively)")
    parser.add_argument("--group", choices=("setting", "model-role"), default="setting")
    parser.add_argument("--format", choices=("table", "tsv"), default="table")
    parser.add_argument("--spec", help="run spec whose evaluation settings apply")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    settings = load_run_spec(args.spec).evaluation if args.spec else EvaluationSettings()
    text = report_dir(args.dir, grouping=args.group, fmt=args.format, settings=settings)
    print(text, end="" if text.endswith("\n") else "\n")
    return 0
