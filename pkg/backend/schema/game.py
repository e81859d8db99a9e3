"""
schema/game.py - Game State Data Shapes

Everything the engine state machine holds: configuration, per-agent state,
bodies, per-tick buffers, actions and meeting records.

This file contains ONLY data shapes:
- NO rules (tools/engine)
- NO event folding (tools/eventlog/replay.py)
"""

from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

DEFAULT_PLAYER_NAMES = ["Alice", "Bob", "Charlie", "Diana", "Eve", "Frank"]
SKIP = "skip"


class Role(str, Enum):
    GOOSE = "goose"
    DUCK = "duck"


class Team(str, Enum):
    GEESE = "geese"
    DUCKS = "ducks"


class Phase(str, Enum):
    FREE_ROAM = "free_roam"
    DISCUSSION = "discussion"
    VOTING = "voting"
    EJECTION = "ejection"
    GAME_OVER = "game_over"


class WinReason(str, Enum):
    TASKS_COMPLETE = "tasks_complete"
    ALL_DUCKS_EJECTED = "all_ducks_ejected"
    PARITY = "parity"
    TIMEOUT = "timeout"


class GameConfig(BaseModel):
    """
    Run configuration for one game.

    Defaults follow the standard setup: 6 agents, 1 Duck, 5 tasks per Goose,
    kill cooldown 5 ticks.
    """
    model_config = ConfigDict(extra="forbid")

    n_agents: int = 6
    n_ducks: int = 1
    tasks_per_goose: int = 5
    kill_cooldown: int = 5
    task_duration: int = 2          # consecutive do_task ticks per task
    tick_budget: int = 60
    discussion_rounds: int = 2
    meeting_budget: int = 3         # shared emergency meetings
    seed: int = 0
    player_names: Optional[list[str]] = None

    @model_validator(mode="after")
    def _check_ranges(self):
        if not (1 <= self.n_ducks < self.n_agents):
            raise ValueError("need 1 <= n_ducks < n_agents")
        if self.tasks_per_goose < 0:
            raise ValueError("tasks_per_goose must be >= 0")
        if self.kill_cooldown < 0:
            raise ValueError("kill_cooldown must be >= 0")
        if self.task_duration < 1:
            raise ValueError("task_duration must be >= 1")
        if self.tick_budget < 1:
            raise ValueError("tick_budget must be >= 1")
        if self.discussion_rounds < 1:
            raise ValueError("discussion_rounds must be >= 1")
        if self.meeting_budget < 0:
            raise ValueError("meeting_budget must be >= 0")
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.player_names is not None:
            if len(self.player_names) != self.n_agents:
                raise ValueError("player_names must list exactly n_agents names")
            if len(set(self.player_names)) != len(self.player_names):
                raise ValueError("player_names must be unique")
            if any(name.strip().lower() == SKIP or not name.strip() for name in self.player_names):
                raise ValueError("player names must be nonempty and not 'skip'")
        return self

    def names(self) -> list[str]:
        if self.player_names is not None:
            return list(self.player_names)
        names = DEFAULT_PLAYER_NAMES[: self.n_agents]
        names += [f"Player{i + 1}" for i in range(len(names), self.n_agents)]
        return names


class Transit(BaseModel):
    from_room: str
    to_room: str
    remaining: int


class TaskState(BaseModel):
    task_id: int
    room: str
    fake: bool = False
    progress: int = 0
    completed: bool = False


class AgentState(BaseModel):
    """
    One agent's slice of the state.

    When alive exactly one of room / transit is set. A dead agent keeps the
    room it died in.
    """
    id: str
    role: Role
    alive: bool = True
    room: Optional[str] = None
    transit: Optional[Transit] = None
    tasks: list[TaskState] = Field(default_factory=list)
    visited_rooms: list[str] = Field(default_factory=list)   # kept sorted
    kill_cooldown_remaining: int = 0

    def task_in(self, room: Optional[str]) -> Optional[TaskState]:
        """The incomplete task anchored to room, if any."""
        for task in self.tasks:
            if task.room == room and not task.completed:
                return task
        return None


class BodyRecord(BaseModel):
    victim: str
    room: str
    death_tick: int


class ChatLine(BaseModel):
    speaker: str
    room: str
    text: str


class WitnessedMove(BaseModel):
    """A departure from / arrival into `room`; `other_room` is the far end of the corridor."""
    mover: str
    room: str
    other_room: str
    direction: Literal["departed", "arrived"]


class TickBuffers(BaseModel):
    proximity_chat: list[ChatLine] = Field(default_factory=list)
    witnessed_moves: list[WitnessedMove] = Field(default_factory=list)


ActionKind = Literal["wait", "move", "do_task", "report", "call_meeting", "kill"]


class Action(BaseModel):
    """
    One free-roam decision. `target` is the room for move and the victim for
    kill; `say` is the optional proximity-chat attachment.
    """
    model_config = ConfigDict(frozen=True)

    kind: ActionKind
    target: Optional[str] = None
    say: Optional[str] = None

    def bare(self) -> "Action":
        """The action without its say attachment (what legality is checked on)."""
        return self if self.say is None else Action(kind=self.kind, target=self.target)

    def render(self) -> str:
        if self.kind in ("move", "kill"):
            text = f"{self.kind}({self.target})"
        else:
            text = f"{self.kind}()" if self.kind != "wait" else "wait"
        if self.say:
            text += f" | say({self.say})"
        return text


class MeetingTrigger(BaseModel):
    kind: Literal["body_report", "emergency"]
    initiator: str                      # reporter or caller
    victim: Optional[str] = None        # first body found (body_report only)
    victims: list[str] = Field(default_factory=list)
    room: str


class TranscriptLine(BaseModel):
    speaker: str
    round: int
    text: str
    seq: Optional[int] = None           # seq of the Utterance event


class MeetingRecord(BaseModel):
    trigger: MeetingTrigger
    meeting_tick: int
    segment_start: int = 0
    speaking_order: list[str] = Field(default_factory=list)
    transcript: list[TranscriptLine] = Field(default_factory=list)
    votes: dict[str, str] = Field(default_factory=dict)
    tally: dict[str, int] = Field(default_factory=dict)
    ejected: Optional[str] = None
    no_ejection_reason: Optional[str] = None
    resolved: bool = False

    def outcome_text(self) -> str:
        if self.ejected is not None:
            return f"{self.ejected} was ejected."
        if self.no_ejection_reason is not None:
            return f"No one was ejected ({self.no_ejection_reason.replace('_', ' ')})."
        return "The meeting has not concluded."


class VoteOutcome(BaseModel):
    """Result of a plurality tally. ejected is None for NoEjection."""
    ejected: Optional[str] = None
    reason: Optional[Literal["tie", "skip_plurality", "no_votes"]] = None
    tally: dict[str, int] = Field(default_factory=dict)


class WinOutcome(BaseModel):
    winner: Team
    reason: WinReason


class GameState(BaseModel):
    """
    The full engine state. Changed ONLY by folding events
    (tools/eventlog/replay.apply_event), in the engine and in replay alike.
    """
    tick: int = 0
    phase: Phase = Phase.FREE_ROAM
    players: list[str] = Field(default_factory=list)
    agents: list[AgentState] = Field(default_factory=list)
    bodies: list[BodyRecord] = Field(default_factory=list)
    tick_buffers: TickBuffers = Field(default_factory=TickBuffers)
    meetings_used: int = 0
    meetings: list[MeetingRecord] = Field(default_factory=list)
    last_respawn_tick: int = 0
    outcome: Optional[WinOutcome] = None

    def agent(self, player: str) -> AgentState:
        for agent in self.agents:
            if agent.id == player:
                return agent
        raise KeyError(player)

    def has_player(self, player: str) -> bool:
        return player in self.players

    def living(self) -> list[AgentState]:
        return [a for a in self.agents if a.alive]

    def living_count(self, role: Role) -> int:
        return sum(1 for a in self.agents if a.alive and a.role == role)

    def current_meeting(self) -> Optional[MeetingRecord]:
        if self.meetings and not self.meetings[-1].resolved:
            return self.meetings[-1]
        return None
