"""
app.py - Application Factory

This file does TWO things:
1. Creates the command-line parser
2. Registers all command groups (one module per command in commands/)

Why separate from main.py?
- Testability: tests can build the parser without running anything
- Clarity: the command surface is separate from process startup

Why separate from commands?
- Single source of truth for the command surface
- Easy to see all registered commands in one place
"""

import argparse
import sys

from commands import render, replay, report, run, verify

COMMANDS = (run, verify, report, replay, render)


class ArenaArgumentParser(argparse.ArgumentParser):
    """Bad flags are a validation error: exit status 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def create_parser() -> argparse.ArgumentParser:
    parser = ArenaArgumentParser(
        prog="goose-duck-arena",
        description="Seeded Goose/Duck social-deduction games with claim verification and metrics",
    )
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING ... (default: LOG_LEVEL or INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser
