"""
schema/trajectory.py - Ground-Truth Trajectory Shapes

Where every agent was, tick by tick, as reconstructed from an event log by
tools/verifier/trajectory.py. Index i of occupancy / presence is tick i.
"""

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from schema.game import Role


class Place(BaseModel):
    """Room(r) | Corridor(a, b) | Dead."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["room", "corridor", "dead"]
    room: Optional[str] = None
    from_room: Optional[str] = None
    to_room: Optional[str] = None

    @classmethod
    def in_room(cls, room: str) -> "Place":
        return cls(kind="room", room=room)

    @classmethod
    def in_corridor(cls, from_room: str, to_room: str) -> "Place":
        return cls(kind="corridor", from_room=from_room, to_room=to_room)

    def label(self) -> str:
        if self.kind == "room":
            return self.room
        if self.kind == "corridor":
            return f"corridor({self.from_room},{self.to_room})"
        return "dead"


DEAD = Place(kind="dead")


class TaskRecord(BaseModel):
    tick: int
    seq: int
    room: str
    task_id: int


class WaitRecord(BaseModel):
    tick: int
    seq: int
    room: str


class WitnessRecord(BaseModel):
    """viewer saw mover depart from / arrive into room (the viewer's room)."""
    tick: int
    seq: int                    # seq of the movement event
    viewer: str
    mover: str
    direction: Literal["departed", "arrived"]
    room: str
    other_room: str


class AgentTrajectory(BaseModel):
    player: str
    role: Role
    occupancy: list[Place] = Field(default_factory=list)         # end of tick
    presence: list[list[Place]] = Field(default_factory=list)    # every place held during the tick, in order
    tasks: list[TaskRecord] = Field(default_factory=list)
    waits: list[WaitRecord] = Field(default_factory=list)
    witnessed: list[WitnessRecord] = Field(default_factory=list)  # as viewer
    death_tick: Optional[int] = None
    death_seq: Optional[int] = None
    death_cause: Optional[Literal["killed", "ejected"]] = None

    def rooms_at(self, tick: int) -> list[str]:
        if not (0 <= tick < len(self.presence)):
            return []
        return [p.room for p in self.presence[tick] if p.kind == "room"]

    def dead_before(self, tick: int) -> bool:
        return self.death_tick is not None and self.death_tick < tick


class TrajectorySet(BaseModel):
    final_tick: int
    agents: dict[str, AgentTrajectory] = Field(default_factory=dict)

    def of(self, player: str) -> AgentTrajectory:
        return self.agents[player]
