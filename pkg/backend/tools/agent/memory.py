"""
tools/agent/memory.py - Agent Memory

Folds an agent's own observations into its AgentMemory, and renders that
memory as the chronological digest that goes into model prompts.

    update_memory(memory, observation)     -> memory (same object, extended)
    record_action(memory, tick, room, act) -> memory
    memory_digest(memory, window=None)     -> str

Memory is append-only and holds nothing the agent did not perceive:
every entry comes from an Observation of this agent or from its own
executed decision.
"""

from typing import Optional

from schema.agent import (
    ActionEntry,
    AgentMemory,
    EncounterEntry,
    HeardLine,
    MeetingMemory,
    PositionEntry,
    WitnessEntry,
)
from schema.game import Action, Phase
from schema.observation import Observation


def update_memory(memory: AgentMemory, observation: Observation) -> AgentMemory:
    """
    Extend memory with the observable facts of this observation. Observing
    the same tick twice adds nothing new.

    Raises:
        ValueError: the observation belongs to another agent
    """
    summary = observation.summary
    if summary.viewer != memory.player:
        raise ValueError(f"observation of {summary.viewer} fed to the memory of {memory.player}")
    tick = summary.tick
    memory.segment_start = summary.segment_start

    if summary.phase == Phase.FREE_ROAM:
        _record_position(memory, tick, summary.room,
                         (summary.transit.from_room, summary.transit.to_room) if summary.transit else None)

        if summary.room is not None and (summary.co_located or summary.bodies_here):
            encounter = EncounterEntry(tick=tick, room=summary.room,
                                       players=list(summary.co_located), bodies=list(summary.bodies_here))
            if encounter not in memory.encounters:
                memory.encounters.append(encounter)

        for move in summary.witnessed:
            entry = WitnessEntry(tick=tick, mover=move.mover, direction=move.direction,
                                 room=move.room, other_room=move.other_room)
            if entry not in memory.witnessed:
                memory.witnessed.append(entry)

        for line in summary.chat:
            heard = HeardLine(tick=tick, speaker=line.speaker, room=line.room, text=line.text)
            if heard not in memory.heard:
                memory.heard.append(heard)

        if summary.last_meeting_outcome and memory.meetings and memory.meetings[-1].outcome is None:
            memory.meetings[-1].outcome = summary.last_meeting_outcome

    meeting = summary.meeting
    if meeting is not None:
        current = _meeting(memory, meeting.meeting_tick)
        if current is None:
            current = MeetingMemory(meeting_tick=meeting.meeting_tick, reason=meeting.reason,
                                    initiator=meeting.initiator, victims=list(meeting.victims))
            memory.meetings.append(current)
        # the transcript only grows within a meeting
        if len(meeting.transcript) > len(current.transcript):
            current.transcript.extend(meeting.transcript[len(current.transcript):])
    return memory


def _record_position(memory: AgentMemory, tick: int, room: Optional[str],
                     corridor: Optional[tuple[str, str]]) -> None:
    entry = PositionEntry(tick=tick, room=room, corridor=corridor)
    if memory.positions and memory.positions[-1] == entry:
        return
    memory.positions.append(entry)


def _meeting(memory: AgentMemory, meeting_tick: int) -> Optional[MeetingMemory]:
    for meeting in memory.meetings:
        if meeting.meeting_tick == meeting_tick:
            return meeting
    return None


def record_action(memory: AgentMemory, tick: int, room: Optional[str], action: Action) -> AgentMemory:
    entry = ActionEntry(tick=tick, kind=action.kind, room=room, target=action.target)
    if entry not in memory.actions:
        memory.actions.append(entry)
    return memory


# =============================================================================
# QUERIES USED BY POLICIES
# =============================================================================

def rooms_since(memory: AgentMemory, start: int) -> list[str]:
    """Rooms occupied at or after start, consecutive repeats collapsed."""
    rooms: list[str] = []
    for entry in memory.positions:
        if entry.tick >= start and entry.room is not None and (not rooms or rooms[-1] != entry.room):
            rooms.append(entry.room)
    return rooms


def last_meeting(memory: AgentMemory) -> Optional[MeetingMemory]:
    return memory.meetings[-1] if memory.meetings else None


# =============================================================================
# DIGEST
# =============================================================================

def _room(room: Optional[str]) -> str:
    return room.replace("_", " ") if room else "?"


def memory_digest(memory: AgentMemory, window: Optional[int] = None, now: Optional[int] = None) -> str:
    """
    Chronological plain-text rendering. With a window only the last
    `window` ticks before `now` are kept; meetings are always kept.
    """
    floor = None
    if window is not None:
        reference = now if now is not None else max((p.tick for p in memory.positions), default=0)
        floor = reference - window

    timeline: list[tuple[int, int, str]] = []
    for entry in memory.positions:
        if entry.room is not None:
            text = f"you were in {_room(entry.room)}"
        else:
            text = f"you were travelling {_room(entry.corridor[0])} -> {_room(entry.corridor[1])}"
        timeline.append((entry.tick, 0, text))
    for entry in memory.actions:
        if entry.kind in ("move", "kill"):
            timeline.append((entry.tick, 1, f"you chose {entry.kind}({entry.target})"))
        else:
            timeline.append((entry.tick, 1, f"you chose {entry.kind}"))
    for entry in memory.encounters:
        parts = []
        if entry.players:
            parts.append("saw " + ", ".join(entry.players))
        if entry.bodies:
            parts.append("found the body of " + ", ".join(entry.bodies))
        timeline.append((entry.tick, 2, f"in {_room(entry.room)} you " + " and ".join(parts)))
    for entry in memory.witnessed:
        verb = "leave toward" if entry.direction == "departed" else "arrive from"
        timeline.append((entry.tick, 3, f"you saw {entry.mover} {verb} {_room(entry.other_room)}"))
    for entry in memory.heard:
        timeline.append((entry.tick, 4, f'{entry.speaker} said "{entry.text}"'))

    lines = ["MEMORY:"]
    for tick, _, text in sorted(timeline, key=lambda item: (item[0], item[1])):
        if floor is not None and tick < floor:
            continue
        lines.append(f"- tick {tick}: {text}")

    for meeting in memory.meetings:
        if meeting.reason == "body_report":
            head = f"Meeting at tick {meeting.meeting_tick}: {meeting.initiator} reported {', '.join(meeting.victims)}."
        else:
            head = f"Meeting at tick {meeting.meeting_tick}: {meeting.initiator} called an emergency meeting."
        lines.append(head)
        for line in meeting.transcript:
            lines.append(f"  [round {line.round}] {line.speaker}: {line.text}")
        if meeting.outcome:
            lines.append(f"  Outcome: {meeting.outcome}")
    if len(lines) == 1:
        lines.append("- nothing yet")
    return "\n".join(lines)
