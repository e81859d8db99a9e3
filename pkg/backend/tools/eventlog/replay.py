"""
tools/eventlog/replay.py - Event Folding (the ONLY way state changes)

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

apply_event(state, event, config) is the single reducer for GameState.
The engine builds an event, folds it through here, then appends it to the
log. Replay folds the same events through the same reducer, never touching
an RNG or a policy. So the log is complete by construction: anything not in
an event cannot be in the state.

The reducer also checks that each event is legal in the state it lands on;
a violation raises ReplayError with the offending seq (corruption signal).

Tick rule: the first event stamped with a new tick clears the per-tick
buffers (chat + witnessed movement).
"""

import hashlib
from typing import Callable, Optional

from schema.events import Event, EventKind, GameLog
from schema.game import (
    SKIP,
    AgentState,
    BodyRecord,
    ChatLine,
    GameConfig,
    GameState,
    MeetingRecord,
    MeetingTrigger,
    Phase,
    Role,
    TaskState,
    TickBuffers,
    TranscriptLine,
    Transit,
    WinOutcome,
    WitnessedMove,
)
from tools.eventlog.event_log import LogError, canonical_json


class ReplayError(LogError):
    def __init__(self, seq: int, message: str):
        self.seq = seq
        super().__init__(f"seq {seq}: {message}")


# =============================================================================
# CANONICAL STATE
# =============================================================================

def canonical_state(state: GameState) -> str:
    return canonical_json(state.model_dump(mode="json"))


def state_digest(state: GameState) -> str:
    return hashlib.sha256(canonical_state(state).encode("utf-8")).hexdigest()


# =============================================================================
# REDUCER
# =============================================================================

def apply_event(state: GameState, event: Event, config: GameConfig) -> None:
    """Fold one event into state (in place)."""
    if event.tick < state.tick:
        raise ReplayError(event.seq, f"tick {event.tick} precedes state tick {state.tick}")
    if event.tick != state.tick:
        state.tick = event.tick
        state.tick_buffers = TickBuffers()
    if state.phase == Phase.GAME_OVER:
        raise ReplayError(event.seq, "event after GameOver")
    handler = _HANDLERS[event.kind]
    try:
        handler(state, event.payload, event, config)
    except KeyError as e:
        raise ReplayError(event.seq, f"unknown player or field {e}") from e


def _fail(event: Event, message: str):
    raise ReplayError(event.seq, f"{event.kind.value}: {message}")


def _living(state: GameState, player: str, event: Event) -> AgentState:
    agent = state.agent(player)
    if not agent.alive:
        _fail(event, f"{player} is dead")
    return agent


def _require_phase(state: GameState, phase: Phase, event: Event) -> None:
    if state.phase != phase:
        _fail(event, f"phase is {state.phase.value}, expected {phase.value}")


def _reset_partial_progress(agent: AgentState) -> None:
    """Consecutive-tick rule: any non-task action or relocation drops partial progress."""
    for task in agent.tasks:
        if not task.completed:
            task.progress = 0


def _visit(agent: AgentState, room: str) -> None:
    if room not in agent.visited_rooms:
        agent.visited_rooms.append(room)
        agent.visited_rooms.sort()


def _meeting(state: GameState, event: Event) -> MeetingRecord:
    meeting = state.current_meeting()
    if meeting is None:
        _fail(event, "no meeting in progress")
    return meeting


def _on_game_start(state, p, event, config):
    if state.players:
        _fail(event, "game already started")
    state.players = list(p["players"])
    for player in state.players:
        room = p["spawn"][player]
        state.agents.append(AgentState(id=player, role=Role.GOOSE, room=room, visited_rooms=[room]))
    state.phase = Phase.FREE_ROAM


def _on_role_assigned(state, p, event, config):
    agent = state.agent(p["player"])
    agent.role = Role(p["role"])
    agent.kill_cooldown_remaining = config.kill_cooldown if agent.role == Role.DUCK else 0


def _on_task_assigned(state, p, event, config):
    agent = state.agent(p["player"])
    agent.tasks.append(TaskState(task_id=p["task_id"], room=p["room"], fake=bool(p["fake"])))


def _on_move_started(state, p, event, config):
    _require_phase(state, Phase.FREE_ROAM, event)
    agent = _living(state, p["player"], event)
    if agent.transit is not None or agent.room != p["from_room"]:
        _fail(event, f"{agent.id} is not in {p['from_room']}")
    if int(p["weight"]) < 1:
        _fail(event, "corridor weight must be >= 1")
    _reset_partial_progress(agent)
    agent.room = None
    agent.transit = Transit(from_room=p["from_room"], to_room=p["to_room"], remaining=int(p["weight"]))
    state.tick_buffers.witnessed_moves.append(
        WitnessedMove(mover=agent.id, room=p["from_room"], other_room=p["to_room"], direction="departed")
    )


def _matching_transit(agent: AgentState, p, event):
    transit = agent.transit
    if transit is None or transit.from_room != p["from_room"] or transit.to_room != p["to_room"]:
        _fail(event, f"{agent.id} is not travelling {p['from_room']} -> {p['to_room']}")
    return transit


def _on_move_progressed(state, p, event, config):
    agent = _living(state, p["player"], event)
    transit = _matching_transit(agent, p, event)
    if int(p["remaining"]) != transit.remaining - 1 or int(p["remaining"]) < 1:
        _fail(event, f"remaining {p['remaining']} does not follow {transit.remaining}")
    transit.remaining = int(p["remaining"])


def _on_arrived(state, p, event, config):
    agent = _living(state, p["player"], event)
    transit = _matching_transit(agent, p, event)
    if transit.remaining != 1:
        _fail(event, f"arrival with {transit.remaining} ticks remaining")
    agent.transit = None
    agent.room = p["to_room"]
    _visit(agent, agent.room)
    state.tick_buffers.witnessed_moves.append(
        WitnessedMove(mover=agent.id, room=p["to_room"], other_room=p["from_room"], direction="arrived")
    )


def _find_task(agent: AgentState, task_id: int, event: Event) -> TaskState:
    for task in agent.tasks:
        if task.task_id == task_id:
            return task
    _fail(event, f"{agent.id} has no task {task_id}")


def _on_task_progressed(state, p, event, config):
    _require_phase(state, Phase.FREE_ROAM, event)
    agent = _living(state, p["player"], event)
    task = _find_task(agent, p["task_id"], event)
    if agent.room != task.room or task.room != p["room"]:
        _fail(event, f"{agent.id} is not at the anchor room of task {task.task_id}")
    if task.completed:
        _fail(event, f"task {task.task_id} already completed")
    if int(p["progress"]) != task.progress + 1 or int(p["progress"]) > config.task_duration:
        _fail(event, f"progress {p['progress']} does not follow {task.progress}")
    task.progress = int(p["progress"])


def _on_task_completed(state, p, event, config):
    agent = _living(state, p["player"], event)
    task = _find_task(agent, p["task_id"], event)
    if task.progress != config.task_duration:
        _fail(event, f"task {task.task_id} has progress {task.progress}/{config.task_duration}")
    task.completed = True


def _on_waited(state, p, event, config):
    _require_phase(state, Phase.FREE_ROAM, event)
    agent = _living(state, p["player"], event)
    if agent.room != p["room"]:
        _fail(event, f"{agent.id} waited in {p['room']} but is at {agent.room}")
    _reset_partial_progress(agent)


def _on_said(state, p, event, config):
    agent = _living(state, p["player"], event)
    if agent.room != p["room"]:
        _fail(event, f"{agent.id} spoke in {p['room']} but is at {agent.room}")
    state.tick_buffers.proximity_chat.append(ChatLine(speaker=agent.id, room=p["room"], text=p["text"]))


def _on_killed(state, p, event, config):
    _require_phase(state, Phase.FREE_ROAM, event)
    actor = _living(state, p["actor"], event)
    target = _living(state, p["target"], event)
    if actor.role != Role.DUCK:
        _fail(event, f"{actor.id} is not a Duck")
    if target.role != Role.GOOSE:
        _fail(event, f"{target.id} is not a Goose")
    if actor.kill_cooldown_remaining != 0:
        _fail(event, f"{actor.id} has cooldown {actor.kill_cooldown_remaining}")
    if actor.room is None or actor.room != target.room or actor.room != p["room"]:
        _fail(event, f"{actor.id} and {target.id} are not together in {p['room']}")
    target.alive = False
    state.bodies.append(BodyRecord(victim=target.id, room=p["room"], death_tick=event.tick))
    actor.kill_cooldown_remaining = config.kill_cooldown
    _reset_partial_progress(actor)


def _on_body_reported(state, p, event, config):
    _require_phase(state, Phase.FREE_ROAM, event)
    reporter = _living(state, p["reporter"], event)
    if reporter.room != p["room"]:
        _fail(event, f"{reporter.id} is not in {p['room']}")
    here = {b.victim for b in state.bodies if b.room == p["room"]}
    victims = list(p["victims"])
    if not victims or not set(victims) <= here:
        _fail(event, f"no such bodies in {p['room']}: {victims}")
    _reset_partial_progress(reporter)
    state.meetings.append(MeetingRecord(
        trigger=MeetingTrigger(kind="body_report", initiator=reporter.id, victim=victims[0],
                               victims=victims, room=p["room"]),
        meeting_tick=event.tick,
        segment_start=state.last_respawn_tick,
    ))


def _on_meeting_called(state, p, event, config):
    _require_phase(state, Phase.FREE_ROAM, event)
    caller = _living(state, p["caller"], event)
    if caller.room != p["room"]:
        _fail(event, f"{caller.id} is not in {p['room']}")
    if state.meetings_used >= config.meeting_budget:
        _fail(event, "emergency meeting budget exhausted")
    state.meetings_used += 1
    _reset_partial_progress(caller)
    state.meetings.append(MeetingRecord(
        trigger=MeetingTrigger(kind="emergency", initiator=caller.id, room=p["room"]),
        meeting_tick=event.tick,
        segment_start=state.last_respawn_tick,
    ))


def _on_phase_changed(state, p, event, config):
    phase = Phase(p["phase"])
    if phase == Phase.DISCUSSION:
        _meeting(state, event)
        cancelled = p.get("cancelled", {})
        for player, origin in cancelled.items():
            agent = _living(state, player, event)
            if agent.transit is None or agent.transit.from_room != origin:
                _fail(event, f"{player} has no transit from {origin} to cancel")
            agent.transit = None
            agent.room = origin
            _reset_partial_progress(agent)
        if any(a.transit is not None for a in state.living()):
            _fail(event, "transit left uncancelled at meeting start")
    elif phase == Phase.FREE_ROAM:
        meeting = state.current_meeting()
        if meeting is not None:
            meeting.resolved = True
    state.phase = phase


def _on_speaking_order_fixed(state, p, event, config):
    _require_phase(state, Phase.DISCUSSION, event)
    meeting = _meeting(state, event)
    order = list(p["order"])
    living = {a.id for a in state.living()}
    if set(order) != living or len(order) != len(living):
        _fail(event, "speaking order must list exactly the living players")
    if order[0] != meeting.trigger.initiator:
        _fail(event, "the meeting initiator must speak first")
    meeting.speaking_order = order


def _on_utterance(state, p, event, config):
    _require_phase(state, Phase.DISCUSSION, event)
    meeting = _meeting(state, event)
    if p["speaker"] not in meeting.speaking_order:
        _fail(event, f"{p['speaker']} is not in the speaking order")
    meeting.transcript.append(
        TranscriptLine(speaker=p["speaker"], round=int(p["round"]), text=p["text"], seq=event.seq)
    )


def _on_vote_cast(state, p, event, config):
    _require_phase(state, Phase.VOTING, event)
    meeting = _meeting(state, event)
    _living(state, p["voter"], event)
    if p["target"] != SKIP:
        _living(state, p["target"], event)
    meeting.votes[p["voter"]] = p["target"]


def _on_ejected(state, p, event, config):
    _require_phase(state, Phase.EJECTION, event)
    meeting = _meeting(state, event)
    agent = _living(state, p["player"], event)
    agent.alive = False
    agent.transit = None
    meeting.ejected = agent.id
    meeting.tally = dict(p["tally"])


def _on_no_ejection(state, p, event, config):
    _require_phase(state, Phase.EJECTION, event)
    meeting = _meeting(state, event)
    meeting.no_ejection_reason = p["reason"]
    meeting.tally = dict(p["tally"])


def _on_respawned(state, p, event, config):
    positions = p["positions"]
    living = {a.id for a in state.living()}
    if set(positions) != living:
        _fail(event, "respawn must place exactly the living players")
    for player, room in positions.items():
        agent = state.agent(player)
        agent.transit = None
        agent.room = room
        _visit(agent, room)
        _reset_partial_progress(agent)
    state.bodies = []
    state.last_respawn_tick = event.tick
    meeting = state.current_meeting()
    if meeting is not None:
        meeting.resolved = True


def _on_cooldown_tick(state, p, event, config):
    agent = _living(state, p["player"], event)
    if agent.role != Role.DUCK:
        _fail(event, f"{agent.id} has no cooldown")
    if int(p["remaining"]) != agent.kill_cooldown_remaining - 1 or int(p["remaining"]) < 0:
        _fail(event, f"cooldown {p['remaining']} does not follow {agent.kill_cooldown_remaining}")
    agent.kill_cooldown_remaining = int(p["remaining"])


def _on_game_over(state, p, event, config):
    state.outcome = WinOutcome(winner=p["winner"], reason=p["reason"])
    meeting = state.current_meeting()
    if meeting is not None:
        meeting.resolved = True
    state.phase = Phase.GAME_OVER


_HANDLERS: dict[EventKind, Callable] = {
    EventKind.GAME_START: _on_game_start,
    EventKind.ROLE_ASSIGNED: _on_role_assigned,
    EventKind.TASK_ASSIGNED: _on_task_assigned,
    EventKind.MOVE_STARTED: _on_move_started,
    EventKind.MOVE_PROGRESSED: _on_move_progressed,
    EventKind.ARRIVED: _on_arrived,
    EventKind.TASK_PROGRESSED: _on_task_progressed,
    EventKind.TASK_COMPLETED: _on_task_completed,
    EventKind.WAITED: _on_waited,
    EventKind.SAID: _on_said,
    EventKind.KILLED: _on_killed,
    EventKind.BODY_REPORTED: _on_body_reported,
    EventKind.MEETING_CALLED: _on_meeting_called,
    EventKind.SPEAKING_ORDER_FIXED: _on_speaking_order_fixed,
    EventKind.UTTERANCE: _on_utterance,
    EventKind.VOTE_CAST: _on_vote_cast,
    EventKind.EJECTED: _on_ejected,
    EventKind.NO_EJECTION: _on_no_ejection,
    EventKind.RESPAWNED: _on_respawned,
    EventKind.COOLDOWN_TICK: _on_cooldown_tick,
    EventKind.PHASE_CHANGED: _on_phase_changed,
    EventKind.GAME_OVER: _on_game_over,
}


# =============================================================================
# REPLAY
# =============================================================================

class Replayer:
    """
    Holds a GameState and folds events into it.

    With record_snapshots=True it keeps the canonical end-of-tick state for
    every tick it has seen (the per-tick state sequence).
    """

    def __init__(self, config: GameConfig, record_snapshots: bool = False):
        self.config = config
        self.state = GameState()
        self.record_snapshots = record_snapshots
        self.snapshots: dict[int, str] = {}
        self._started = False

    def apply(self, event: Event) -> None:
        if self.record_snapshots and self._started and event.tick != self.state.tick:
            self.snapshots[self.state.tick] = canonical_state(self.state)
        apply_event(self.state, event, self.config)
        self._started = True

    def finish(self) -> None:
        if self.record_snapshots and self._started:
            self.snapshots[self.state.tick] = canonical_state(self.state)


def replay(log: GameLog, with_snapshots: bool = False) -> tuple[GameState, Optional[dict[int, str]]]:
    """
    Rebuild the final state from a complete log.

    Returns:
        (final state, {tick: canonical state} or None)

    Raises:
        ReplayError: an event is illegal in the reconstructed state
    """
    replayer = Replayer(log.header.config, record_snapshots=with_snapshots)
    for event in log.events:
        replayer.apply(event)
    replayer.finish()
    return replayer.state, (replayer.snapshots if with_snapshots else None)


def iter_replay(log: GameLog):
    """Yield (event, state_before_event) for every event; the state object is live."""
    replayer = Replayer(log.header.config)
    for event in log.events:
        yield event, replayer.state
        replayer.apply(event)


def meetings_from_log(log: GameLog) -> list[MeetingRecord]:
    """Every meeting of the game, with its segment start and outcome."""
    state, _ = replay(log)
    return state.meetings


def pre_game_over_digest(log: GameLog) -> str:
    """Digest of the play state right before GameOver (what GameOver.state_digest stores)."""
    replayer = Replayer(log.header.config)
    for event in log.events[:-1]:
        replayer.apply(event)
    return state_digest(replayer.state)
