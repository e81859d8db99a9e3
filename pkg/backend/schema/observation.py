"""
schema/observation.py - Observation Data Shapes

What one agent perceives at one decision point: two rendered vector views
and a structured summary. Built by tools/observation/observation_builder.py.
"""

from typing import Literal, Optional

from pydantic import BaseModel, Field

from schema.game import ChatLine, Phase, Role, TranscriptLine, WitnessedMove


class RenderedView(BaseModel):
    kind: Literal["global", "local"]
    width: int
    height: int
    svg: str


class TransitView(BaseModel):
    from_room: str
    to_room: str
    remaining: int


class AdjacentRoom(BaseModel):
    room: str
    cost: int


class TaskView(BaseModel):
    task_id: int
    room: str
    progress: int
    duration: int
    completed: bool


class MeetingView(BaseModel):
    reason: Literal["body_report", "emergency"]
    initiator: str
    room: str
    victims: list[str] = Field(default_factory=list)
    meeting_tick: int
    speaking_order: list[str] = Field(default_factory=list)
    transcript: list[TranscriptLine] = Field(default_factory=list)
    known_dead: list[str] = Field(default_factory=list)


class StructuredSummary(BaseModel):
    """
    The agent's perceptual state as data. Lists are in a stable order so the
    rendered text is deterministic.
    """
    viewer: str
    role: Role
    tick: int
    phase: Phase
    players: list[str]
    teammates: list[str] = Field(default_factory=list)      # Ducks only
    room: Optional[str] = None
    transit: Optional[TransitView] = None
    co_located: list[str] = Field(default_factory=list)
    bodies_here: list[str] = Field(default_factory=list)
    witnessed: list[WitnessedMove] = Field(default_factory=list)
    adjacent: list[AdjacentRoom] = Field(default_factory=list)
    tasks: list[TaskView] = Field(default_factory=list)
    chat: list[ChatLine] = Field(default_factory=list)
    kill_cooldown: Optional[int] = None                      # Ducks only
    emergency_room: str
    emergency_meetings_left: int
    segment_start: int = 0
    last_meeting_outcome: Optional[str] = None
    meeting: Optional[MeetingView] = None


class Observation(BaseModel):
    """global_view / local_view are None when the seat does not use images."""
    global_view: Optional[RenderedView] = None
    local_view: Optional[RenderedView] = None
    summary: StructuredSummary
