"""
main.py - Entry Point

This file does ONE thing: runs a command and turns its outcome into an
exit status.

    0  success
    1  validation error (bad spec / flags / inputs, missing files)
    2  runtime failure (aborted games, endpoint failures, corrupt logs)
"""

import logging
import sys
from typing import Optional

from pydantic import ValidationError

from app import create_parser
from auto.auto import ConfigError, configure_logging
from tools.claims.claim_extractor import ExtractionTransportError
from tools.eventlog.event_log import LogError
from tools.eventlog.replay import ReplayError
from tools.map.map_graph import MapConfigError
from tools.observation.observation_builder import DeadViewerError
from tools.business_logic.evaluation_flow import TickRangeError

logger = logging.getLogger("cli")

VALIDATION_ERRORS = (ConfigError, MapConfigError, ValidationError, TickRangeError, DeadViewerError,
                     FileNotFoundError, LogError)


def main(argv: Optional[list[str]] = None) -> int:
    parser = create_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except (ReplayError, ExtractionTransportError) as e:
        logger.error("%s", e)
        return 2
    except VALIDATION_ERRORS as e:
        logger.error("%s", e)
        return 1
    except Exception as e:
        logger.exception("Unexpected failure: %s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
