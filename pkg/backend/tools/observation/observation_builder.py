"""
tools/observation/observation_builder.py - Partial Observations

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

Input:  GameState + viewer (+ the map)
Output: Observation = global view + local view + StructuredSummary

    build_observation(state, viewer, map)   -> Observation
    render_views(state, viewer, map)        -> (global, local)
    render_text(summary)                    -> str   (fixed template)

═══════════════════════════════════════════════════════════════════════════════
WHAT THE VIEWER MAY SEE
═══════════════════════════════════════════════════════════════════════════════

✅ Its own position, transit, tasks, cooldown (Ducks) and teammates (Ducks)
✅ Living players and bodies in its current room
✅ This tick's departures from / arrivals into its room, so far
✅ Proximity chat said in its room this tick, so far
✅ During meetings: trigger, speaking order, transcript, known dead

❌ The position of anyone else, ever
❌ Other players' roles (ejections are not revealed)
"""

from typing import Optional

from schema.game import GameState, Phase, Role
from schema.map import Map
from schema.observation import (
    AdjacentRoom,
    MeetingView,
    Observation,
    RenderedView,
    StructuredSummary,
    TaskView,
    TransitView,
)
from tools.map.map_graph import adjacent
from tools.observation.svg_render import render_global, render_local


class DeadViewerError(ValueError):
    """Observations are only built for living agents."""


def build_summary(state: GameState, viewer: str, game_map: Map, task_duration: int,
                  meeting_budget: int) -> StructuredSummary:
    if not state.has_player(viewer):
        raise KeyError(viewer)
    me = state.agent(viewer)
    if not me.alive:
        raise DeadViewerError(f"{viewer} is dead and has no observation")

    teammates = []
    if me.role == Role.DUCK:
        teammates = sorted(a.id for a in state.agents if a.role == Role.DUCK and a.id != viewer)

    room = me.room
    co_located, bodies_here, witnessed, chat, exits = [], [], [], [], []
    if room is not None:
        co_located = sorted(a.id for a in state.living() if a.room == room and a.id != viewer)
        bodies_here = sorted(b.victim for b in state.bodies if b.room == room)
        if state.phase == Phase.FREE_ROAM:
            witnessed = [m for m in state.tick_buffers.witnessed_moves if m.room == room and m.mover != viewer]
            chat = [line for line in state.tick_buffers.proximity_chat if line.room == room and line.speaker != viewer]
        exits = [AdjacentRoom(room=other, cost=cost) for other, cost in adjacent(game_map, room)]

    transit = None
    if me.transit is not None:
        transit = TransitView(from_room=me.transit.from_room, to_room=me.transit.to_room,
                              remaining=me.transit.remaining)

    tasks = [
        TaskView(task_id=t.task_id, room=t.room, progress=t.progress, duration=task_duration,
                 completed=t.completed)
        for t in me.tasks
    ]

    meeting_view = None
    current = state.current_meeting()
    if current is not None and state.phase in (Phase.DISCUSSION, Phase.VOTING):
        order = current.speaking_order
        meeting_view = MeetingView(
            reason=current.trigger.kind,
            initiator=current.trigger.initiator,
            room=current.trigger.room,
            victims=list(current.trigger.victims),
            meeting_tick=current.meeting_tick,
            speaking_order=list(order),
            transcript=list(current.transcript),
            known_dead=[p for p in state.players if p not in order] if order else [],
        )

    last_outcome = None
    if (state.phase == Phase.FREE_ROAM and state.meetings and state.meetings[-1].resolved
            and state.tick == state.last_respawn_tick):
        last_outcome = state.meetings[-1].outcome_text()

    return StructuredSummary(
        viewer=viewer,
        role=me.role,
        tick=state.tick,
        phase=state.phase,
        players=list(state.players),
        teammates=teammates,
        room=room,
        transit=transit,
        co_located=co_located,
        bodies_here=bodies_here,
        witnessed=witnessed,
        adjacent=exits,
        tasks=tasks,
        chat=chat,
        kill_cooldown=me.kill_cooldown_remaining if me.role == Role.DUCK else None,
        emergency_room=game_map.emergency_room,
        emergency_meetings_left=max(0, meeting_budget - state.meetings_used),
        segment_start=state.last_respawn_tick,
        last_meeting_outcome=last_outcome,
        meeting=meeting_view,
    )


def build_observation(state: GameState, viewer: str, game_map: Map, task_duration: int = 2,
                      meeting_budget: int = 3, with_views: bool = True) -> Observation:
    """
    Raises:
        DeadViewerError: viewer is dead
        KeyError: viewer is not a player
    """
    summary = build_summary(state, viewer, game_map, task_duration, meeting_budget)
    if not with_views:
        return Observation(summary=summary)
    return Observation(
        global_view=render_global(summary, game_map),
        local_view=render_local(summary, game_map),
        summary=summary,
    )


def render_views(state: GameState, viewer: str, game_map: Map, task_duration: int = 2,
                 meeting_budget: int = 3) -> tuple[RenderedView, RenderedView]:
    observation = build_observation(state, viewer, game_map, task_duration, meeting_budget)
    return observation.global_view, observation.local_view


# =============================================================================
# TEXT TEMPLATE
# =============================================================================

def _room(room: Optional[str]) -> str:
    return room.replace("_", " ") if room else "?"


def render_text(summary: StructuredSummary) -> str:
    """Deterministic plain-text rendering used in prompts and by the render command."""
    lines = [
        f"You are {summary.viewer}. Role: {summary.role.value.upper()}. Tick {summary.tick}, phase {summary.phase.value}.",
        f"Players: {', '.join(summary.players)}.",
    ]
    if summary.teammates:
        lines.append(f"Fellow Ducks: {', '.join(summary.teammates)}.")
    if summary.last_meeting_outcome:
        lines.append(f"Last meeting: {summary.last_meeting_outcome}")

    if summary.transit is not None:
        t = summary.transit
        lines.append(f"You are travelling from {_room(t.from_room)} to {_room(t.to_room)}, "
                     f"{t.remaining} tick(s) remaining.")
    else:
        lines.append(f"You are in {_room(summary.room)}.")
        lines.append("Players here: " + (", ".join(summary.co_located) if summary.co_located else "none") + ".")
        if summary.bodies_here:
            lines.append(f"Bodies here: {', '.join(summary.bodies_here)}.")
        for move in summary.witnessed:
            if move.direction == "departed":
                lines.append(f"You saw {move.mover} leave toward {_room(move.other_room)}.")
            else:
                lines.append(f"You saw {move.mover} arrive from {_room(move.other_room)}.")
        if summary.adjacent:
            exits = ", ".join(f"{_room(a.room)} ({a.cost} tick{'s' if a.cost != 1 else ''})" for a in summary.adjacent)
            lines.append(f"Adjacent rooms: {exits}.")
        for line in summary.chat:
            lines.append(f'{line.speaker} says: "{line.text}"')

    if summary.tasks:
        lines.append("Your tasks:")
        for task in summary.tasks:
            status = "done" if task.completed else f"{task.progress}/{task.duration}"
            lines.append(f"  - task {task.task_id} in {_room(task.room)}: {status}")
    if summary.kill_cooldown is not None:
        lines.append(f"Kill cooldown: {summary.kill_cooldown} tick(s).")
    lines.append(f"Emergency button: {_room(summary.emergency_room)}, "
                 f"{summary.emergency_meetings_left} meeting(s) left.")

    meeting = summary.meeting
    if meeting is not None:
        if meeting.reason == "body_report":
            lines.append(f"MEETING at tick {meeting.meeting_tick}: {meeting.initiator} reported "
                         f"{', '.join(meeting.victims)} in {_room(meeting.room)}.")
        else:
            lines.append(f"MEETING at tick {meeting.meeting_tick}: {meeting.initiator} called "
                         f"an emergency meeting in {_room(meeting.room)}.")
        lines.append(f"Speaking order: {', '.join(meeting.speaking_order)}.")
        if meeting.known_dead:
            lines.append(f"Known dead: {', '.join(meeting.known_dead)}.")
        if meeting.transcript:
            lines.append("Discussion so far:")
            for entry in meeting.transcript:
                lines.append(f"  [round {entry.round}] {entry.speaker}: {entry.text}")
    return "\n".join(lines)
