"""
commands/render.py - `render` command

    render --log <file> --tick T --viewer NAME [--out <dir>] [--map <file>]

Writes the viewer's global and local SVG views and the summary text for
the end of tick T.
"""

import argparse

from tools.business_logic.evaluation_flow import render_snapshot


def register(subparsers) -> None:
    parser = subparsers.add_parser("render", help="render one agent's observation at a tick")
    parser.add_argument("--log", required=True, help="event log file")
    parser.add_argument("--tick", required=True, type=int)
    parser.add_argument("--viewer", required=True, help="player name")
    parser.add_argument("--out", help="output directory (default: next to the log)")
    parser.add_argument("--map", help="map YAML the game was played on (default map otherwise)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    for path in render_snapshot(args.log, args.tick, args.viewer, out_dir=args.out, map_path=args.map):
        print(path)
    return 0
