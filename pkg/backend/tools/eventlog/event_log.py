"""
tools/eventlog/event_log.py - Event Log Persistence Format

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

One JSON record per line, canonical key order, UTF-8:

    line 1      {"header": {...}}
    line 2..n   {"kind": ..., "payload": {...}, "seq": 0, "tick": 0}

Guarantees:
- append() refuses sequence gaps
- serialize_log(parse_log(b)) == b for every log this code wrote
- parse errors name the line; a log without GameStart/GameOver is reported
  as INCOMPLETE, which is a different error from a parse failure

This file does NOT fold events into state; see replay.py.
"""

import json
import logging
from pathlib import Path
from typing import IO, Optional

from pydantic import ValidationError

from schema.events import SCHEMA_VERSION, Event, EventKind, GameLog, GameLogHeader

logger = logging.getLogger("event_log")


class LogError(ValueError):
    """Base for every event-log problem."""


class SequenceGapError(LogError):
    pass


class LogParseError(LogError):
    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class SchemaVersionError(LogError):
    pass


class IncompleteLogError(LogError):
    pass


# =============================================================================
# CANONICAL FORM
# =============================================================================

def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serialize_event(event: Event) -> str:
    return canonical_json(event.model_dump(mode="json"))


def serialize_header(header: GameLogHeader) -> str:
    return canonical_json({"header": header.model_dump(mode="json")})


def serialize_log(log: GameLog) -> bytes:
    lines = [serialize_header(log.header)] + [serialize_event(e) for e in log.events]
    return ("\n".join(lines) + "\n").encode("utf-8")


# =============================================================================
# WRITING
# =============================================================================

class EventLogWriter:
    """Streams a log to disk line by line as events are appended."""

    def __init__(self, path: str | Path, header: GameLogHeader):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle: Optional[IO[str]] = open(self.path, "w", encoding="utf-8", newline="\n")
        self._write_line(serialize_header(header))

    def write(self, event: Event) -> None:
        self._write_line(serialize_event(event))

    def _write_line(self, line: str) -> None:
        if self._handle is None:
            raise LogError(f"Log writer for {self.path} is closed")
        try:
            self._handle.write(line + "\n")
            self._handle.flush()
        except OSError as e:
            raise LogError(f"Write failure on {self.path}: {e}") from e

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def append(log: GameLog, event: Event, writer: Optional[EventLogWriter] = None) -> None:
    """
    Append one event.

    Raises:
        SequenceGapError: event.seq is not last seq + 1
        LogError: the writer could not persist the line
    """
    expected = log.last_seq() + 1
    if event.seq != expected:
        raise SequenceGapError(f"expected seq {expected}, got {event.seq}")
    if log.events and event.tick < log.events[-1].tick:
        raise LogError(f"tick went backwards at seq {event.seq}")
    log.events.append(event)
    if writer is not None:
        writer.write(event)


# =============================================================================
# PARSING
# =============================================================================

def _major(version: str) -> str:
    return str(version).split(".", 1)[0]


def parse_log(data: bytes) -> GameLog:
    """
    Parse the line-delimited format.

    Raises:
        LogParseError: malformed line (with line number)
        SchemaVersionError: unknown major schema version
        IncompleteLogError: missing GameStart or GameOver
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else str(data)
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise IncompleteLogError("empty log")

    try:
        first = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise LogParseError(1, f"header is not JSON ({e})") from e
    if not isinstance(first, dict) or "header" not in first:
        raise LogParseError(1, "first line must be the header record")
    version = first["header"].get("schema_version") if isinstance(first["header"], dict) else None
    if version is None or _major(version) != _major(SCHEMA_VERSION):
        raise SchemaVersionError(f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
    try:
        header = GameLogHeader.model_validate(first["header"])
    except ValidationError as e:
        raise LogParseError(1, f"invalid header: {e}") from e

    events: list[Event] = []
    for index, line in enumerate(lines[1:], start=2):
        try:
            event = Event.model_validate(json.loads(line))
        except (json.JSONDecodeError, ValidationError) as e:
            raise LogParseError(index, str(e)) from e
        if events and event.seq != events[-1].seq + 1:
            raise LogParseError(index, f"sequence gap: {events[-1].seq} -> {event.seq}")
        if not events and event.seq != 0:
            raise LogParseError(index, f"first event must have seq 0, got {event.seq}")
        if events and event.tick < events[-1].tick:
            raise LogParseError(index, "tick went backwards")
        if events and events[-1].kind == EventKind.GAME_OVER:
            raise LogParseError(index, "event after GameOver")
        events.append(event)

    if not events or events[0].kind != EventKind.GAME_START:
        raise IncompleteLogError("log does not begin with GameStart")
    if events[-1].kind != EventKind.GAME_OVER:
        raise IncompleteLogError(f"log has no GameOver (last seq {events[-1].seq})")

    return GameLog(header=header, events=events)


def read_log(path: str | Path) -> GameLog:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise LogError(f"Cannot read log {path}: {e}") from e
    return parse_log(data)
