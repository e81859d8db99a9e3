"""
tools/actions/action_executor.py - Action Execution Layer

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

This file is the ACTION EXECUTION LAYER.

Input:  One free-roam Action chosen by a player's seat
Output: The events that record it (already folded into the session state)

It does NOT choose actions (tools/agent) and does NOT decide phases or wins
(tools/engine). It only checks legality and routes by action kind.

═══════════════════════════════════════════════════════════════════════════════
ACTION KINDS
═══════════════════════════════════════════════════════════════════════════════

wait           -> Waited
move(room)     -> MoveStarted (corridor weight from the map)
do_task        -> TaskProgressed [+ TaskCompleted on the last tick]
kill(player)   -> Killed
report         -> BodyReported (every body in the room)
call_meeting   -> MeetingCalled

A say(...) attachment is emitted as Said BEFORE the action, so it is heard
by agents in the room the speaker is in when deciding.
"""

import logging
from typing import Optional

from schema.events import Event, EventKind
from schema.game import Action
from tools.engine.game_engine import GameSession, IllegalActionError, legal_actions

logger = logging.getLogger("action_executor")


def execute(session: GameSession, player: str, action: Action,
            fallback: Optional[str] = None) -> list[Event]:
    """
    Apply one action of player.

    Args:
        session: the running game
        player: the acting agent
        action: must be in legal_actions(...) once the say attachment is removed
        fallback: reason string when the seat substituted its default action;
                  recorded on the action event

    Returns:
        list[Event]: the events emitted, in order

    Raises:
        IllegalActionError: the action is not legal for player right now
    """
    state = session.state
    legal = legal_actions(state, session.map, session.config, player)
    if action.bare() not in legal:
        raise IllegalActionError(f"{player} cannot {action.render()}")

    agent = state.agent(player)
    events: list[Event] = []
    if action.say and agent.room is not None:
        events.append(session.emit(EventKind.SAID, {"player": player, "room": agent.room, "text": action.say}))

    extra = {"fallback": fallback} if fallback else {}
    if fallback:
        logger.warning("%s fell back to %s (%s)", player, action.render(), fallback)

    if action.kind == "wait":
        events += _execute_wait(session, player, extra)
    elif action.kind == "move":
        events += _execute_move(session, player, action.target, extra)
    elif action.kind == "do_task":
        events += _execute_do_task(session, player, extra)
    elif action.kind == "kill":
        events += _execute_kill(session, player, action.target, extra)
    elif action.kind == "report":
        events += _execute_report(session, player, extra)
    elif action.kind == "call_meeting":
        events += _execute_call_meeting(session, player, extra)
    else:
        raise IllegalActionError(f"Unknown action kind '{action.kind}'")

    return events


# =============================================================================
# ACTION-SPECIFIC EXECUTORS
# =============================================================================

def _execute_wait(session: GameSession, player: str, extra: dict) -> list[Event]:
    room = session.state.agent(player).room
    return [session.emit(EventKind.WAITED, {"player": player, "room": room, **extra})]


def _execute_move(session: GameSession, player: str, to_room: str, extra: dict) -> list[Event]:
    from_room = session.state.agent(player).room
    weight = session.map.weight(from_room, to_room)
    return [session.emit(EventKind.MOVE_STARTED, {
        "player": player,
        "from_room": from_room,
        "to_room": to_room,
        "weight": weight,
        **extra,
    })]


def _execute_do_task(session: GameSession, player: str, extra: dict) -> list[Event]:
    agent = session.state.agent(player)
    task = agent.task_in(agent.room)
    events = [session.emit(EventKind.TASK_PROGRESSED, {
        "player": player,
        "task_id": task.task_id,
        "room": task.room,
        "progress": task.progress + 1,
        **extra,
    })]
    if task.progress >= session.config.task_duration:
        events.append(session.emit(EventKind.TASK_COMPLETED, {
            "player": player,
            "task_id": task.task_id,
            "room": task.room,
        }))
    return events


def _execute_kill(session: GameSession, player: str, target: str, extra: dict) -> list[Event]:
    room = session.state.agent(player).room
    logger.debug("%s killed %s in %s", player, target, room)
    return [session.emit(EventKind.KILLED, {"actor": player, "target": target, "room": room, **extra})]


def _execute_report(session: GameSession, player: str, extra: dict) -> list[Event]:
    state = session.state
    room = state.agent(player).room
    bodies = sorted((b for b in state.bodies if b.room == room), key=lambda b: (b.death_tick, b.victim))
    return [session.emit(EventKind.BODY_REPORTED, {
        "reporter": player,
        "victims": [b.victim for b in bodies],
        "room": room,
        **extra,
    })]


def _execute_call_meeting(session: GameSession, player: str, extra: dict) -> list[Event]:
    room = session.state.agent(player).room
    return [session.emit(EventKind.MEETING_CALLED, {"caller": player, "room": room, **extra})]
