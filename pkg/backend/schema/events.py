"""
schema/events.py - Event Log Data Shapes

The append-only, tick-stamped record of every state mutation, and the log
that carries it. The line format is documented in docs/event_log_format.md.

Payload contract per kind = REQUIRED_PAYLOAD below. Optional extras
(e.g. "fallback" annotations) are allowed on top.
"""

from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from schema.game import GameConfig

SCHEMA_VERSION = "1.0"


class EventKind(str, Enum):
    GAME_START = "GameStart"
    ROLE_ASSIGNED = "RoleAssigned"
    TASK_ASSIGNED = "TaskAssigned"
    MOVE_STARTED = "MoveStarted"
    MOVE_PROGRESSED = "MoveProgressed"
    ARRIVED = "Arrived"
    TASK_PROGRESSED = "TaskProgressed"
    TASK_COMPLETED = "TaskCompleted"
    WAITED = "Waited"
    SAID = "Said"
    KILLED = "Killed"
    BODY_REPORTED = "BodyReported"
    MEETING_CALLED = "MeetingCalled"
    SPEAKING_ORDER_FIXED = "SpeakingOrderFixed"
    UTTERANCE = "Utterance"
    VOTE_CAST = "VoteCast"
    EJECTED = "Ejected"
    NO_EJECTION = "NoEjection"
    RESPAWNED = "Respawned"
    COOLDOWN_TICK = "CooldownTick"
    PHASE_CHANGED = "PhaseChanged"
    GAME_OVER = "GameOver"


REQUIRED_PAYLOAD: dict[EventKind, tuple[str, ...]] = {
    EventKind.GAME_START: ("players", "spawn"),
    EventKind.ROLE_ASSIGNED: ("player", "role"),
    EventKind.TASK_ASSIGNED: ("player", "task_id", "room", "fake"),
    EventKind.MOVE_STARTED: ("player", "from_room", "to_room", "weight"),
    EventKind.MOVE_PROGRESSED: ("player", "from_room", "to_room", "remaining"),
    EventKind.ARRIVED: ("player", "from_room", "to_room"),
    EventKind.TASK_PROGRESSED: ("player", "task_id", "room", "progress"),
    EventKind.TASK_COMPLETED: ("player", "task_id", "room"),
    EventKind.WAITED: ("player", "room"),
    EventKind.SAID: ("player", "room", "text"),
    EventKind.KILLED: ("actor", "target", "room"),
    EventKind.BODY_REPORTED: ("reporter", "victims", "room"),
    EventKind.MEETING_CALLED: ("caller", "room"),
    EventKind.SPEAKING_ORDER_FIXED: ("order",),
    EventKind.UTTERANCE: ("speaker", "round", "text"),
    EventKind.VOTE_CAST: ("voter", "target"),
    EventKind.EJECTED: ("player", "tally"),
    EventKind.NO_EJECTION: ("reason", "tally"),
    EventKind.RESPAWNED: ("positions",),
    EventKind.COOLDOWN_TICK: ("player", "remaining"),
    EventKind.PHASE_CHANGED: ("phase",),
    EventKind.GAME_OVER: ("winner", "reason", "state_digest"),
}

# Free-roam events that record the single decision of a queried agent
ACTION_KINDS = {
    EventKind.WAITED,
    EventKind.MOVE_STARTED,
    EventKind.TASK_PROGRESSED,
    EventKind.KILLED,
    EventKind.BODY_REPORTED,
    EventKind.MEETING_CALLED,
}


class Event(BaseModel):
    model_config = ConfigDict(frozen=True)

    seq: int
    tick: int
    kind: EventKind
    payload: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _payload_complete(self):
        missing = [k for k in REQUIRED_PAYLOAD[self.kind] if k not in self.payload]
        if missing:
            raise ValueError(f"{self.kind.value} payload is missing {missing}")
        return self

    def actor(self) -> str | None:
        """The agent whose decision this event records (free-roam action kinds only)."""
        if self.kind == EventKind.KILLED:
            return self.payload["actor"]
        if self.kind == EventKind.BODY_REPORTED:
            return self.payload["reporter"]
        if self.kind == EventKind.MEETING_CALLED:
            return self.payload["caller"]
        if self.kind in ACTION_KINDS:
            return self.payload["player"]
        return None


class GameLogHeader(BaseModel):
    schema_version: str = SCHEMA_VERSION
    map_id: str
    map_hash: str
    seed: int
    config: GameConfig
    setting: str = "default"
    seats: dict[str, str] = Field(default_factory=dict)   # player -> policy binding
    text_only: bool = True


class GameLog(BaseModel):
    header: GameLogHeader
    events: list[Event] = Field(default_factory=list)

    def last_seq(self) -> int:
        return self.events[-1].seq if self.events else -1

    def game_over(self) -> Event | None:
        if self.events and self.events[-1].kind == EventKind.GAME_OVER:
            return self.events[-1]
        return None
