"""
schema/agent.py - Agent-Side Data Shapes

What an agent remembers, and what a seat hands back to the engine.
Only shapes; update rules live in tools/agent/memory.py.
"""

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from schema.game import Action, TranscriptLine


class Decision(BaseModel):
    """A seat's answer. fallback names the reason when the default was substituted."""
    value: Union[Action, str]
    fallback: Optional[str] = None
    attempts: int = 1


class PositionEntry(BaseModel):
    tick: int
    room: Optional[str] = None
    corridor: Optional[tuple[str, str]] = None     # (from, to) while travelling


class WitnessEntry(BaseModel):
    tick: int
    mover: str
    direction: Literal["departed", "arrived"]
    room: str
    other_room: str


class EncounterEntry(BaseModel):
    tick: int
    room: str
    players: list[str] = Field(default_factory=list)
    bodies: list[str] = Field(default_factory=list)


class ActionEntry(BaseModel):
    """One of the agent's own free-roam decisions, as executed."""
    tick: int
    kind: str
    room: Optional[str] = None
    target: Optional[str] = None


class HeardLine(BaseModel):
    tick: int
    speaker: str
    room: str
    text: str


class MeetingMemory(BaseModel):
    meeting_tick: int
    reason: str
    initiator: str
    victims: list[str] = Field(default_factory=list)
    transcript: list[TranscriptLine] = Field(default_factory=list)
    outcome: Optional[str] = None


class AgentMemory(BaseModel):
    """
    Append-only recollection built from the agent's own observations.
    Every entry is something the agent saw in some observation.
    """
    player: str
    positions: list[PositionEntry] = Field(default_factory=list)
    witnessed: list[WitnessEntry] = Field(default_factory=list)
    encounters: list[EncounterEntry] = Field(default_factory=list)
    heard: list[HeardLine] = Field(default_factory=list)
    actions: list[ActionEntry] = Field(default_factory=list)
    meetings: list[MeetingMemory] = Field(default_factory=list)
    segment_start: int = 0
