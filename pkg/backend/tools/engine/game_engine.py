"""
tools/engine/game_engine.py - Game State Machine

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

Input:  Map + GameConfig + one seat (decision source) per player
Output: A complete GameLog (GameStart ... GameOver)

    new_game(map, config)           -> GameSession
    legal_actions(state, ...)       -> [Action, ...]
    step_free_roam(session, seats)  -> [Event, ...]     one tick
    run_meeting(session, seats)     -> MeetingRecord
    tally_votes(votes, living)      -> VoteOutcome
    check_win(state, config)        -> WinOutcome | None
    run_game(map, config, seats)    -> GameLog

═══════════════════════════════════════════════════════════════════════════════
THE CONTRACT
═══════════════════════════════════════════════════════════════════════════════

- The engine NEVER writes to GameState directly. It builds an Event and
  GameSession.emit() folds it through replay.apply_event, then appends it.
- All randomness comes from one random.Random seeded with the game seed.
  Replay never needs it, because every random outcome (roles, spawns, query
  order, speaking order, respawns) is written into an event.
- Seats are anything with choose_action / speak / vote returning a Decision
  (tools/agent/policy.AgentSeat). The engine does not know about models.

Tick layout: a free-roam step stamps its events with the current tick and
then advances the clock. A meeting keeps the trigger tick; the Respawned
event that closes it is stamped with the next tick.
"""

import logging
import random
from collections import Counter
from pathlib import Path
from typing import Callable, Mapping, Optional, Union

from schema.events import Event, EventKind, GameLog, GameLogHeader
from schema.game import (
    SKIP,
    Action,
    GameConfig,
    GameState,
    MeetingRecord,
    Phase,
    Role,
    Team,
    VoteOutcome,
    WinOutcome,
    WinReason,
)
from schema.map import Map
from tools.eventlog.event_log import EventLogWriter, append
from tools.eventlog.replay import Replayer, canonical_state, state_digest
from tools.map.map_graph import adjacent, map_digest

logger = logging.getLogger("engine")


class GameConfigError(ValueError):
    """The config cannot be played on this map."""


class UnknownPlayerError(KeyError):
    pass


class IllegalActionError(ValueError):
    pass


class InvalidVoteError(ValueError):
    pass


# =============================================================================
# SESSION
# =============================================================================

class GameSession:
    """
    One running game: the log, the live state (owned by a Replayer), the
    clock and the seeded RNG.
    """

    def __init__(self, game_map: Map, config: GameConfig, header: GameLogHeader,
                 snapshots: bool = False):
        self.map = game_map
        self.config = config
        self.rng = random.Random(config.seed)
        self.log = GameLog(header=header)
        self.clock = 0
        self.record_snapshots = snapshots
        self.snapshots: dict[int, str] = {}
        self._replayer = Replayer(config)
        self._writer: Optional[EventLogWriter] = None

    @property
    def state(self) -> GameState:
        return self._replayer.state

    @property
    def over(self) -> bool:
        return self.state.phase == Phase.GAME_OVER

    def emit(self, kind: EventKind, payload: dict) -> Event:
        event = Event(seq=self.log.last_seq() + 1, tick=self.clock, kind=kind, payload=payload)
        self._replayer.apply(event)
        append(self.log, event, self._writer)
        logger.debug("t=%d %s %s", event.tick, kind.value, payload)
        return event

    def advance_clock(self) -> None:
        self._snapshot()
        self.clock += 1

    def _snapshot(self) -> None:
        if self.record_snapshots:
            self.snapshots[self.state.tick] = canonical_state(self.state)

    def attach_writer(self, path: Union[str, Path]) -> None:
        """Stream the log to path from here on (already-emitted events included)."""
        self._writer = EventLogWriter(path, self.log.header)
        for event in self.log.events:
            self._writer.write(event)

    def close(self) -> None:
        if self._writer is not None:
            self._writer.close()

    def finish(self, outcome: WinOutcome) -> Event:
        digest = state_digest(self.state)
        event = self.emit(EventKind.GAME_OVER, {
            "winner": outcome.winner.value,
            "reason": outcome.reason.value,
            "state_digest": digest,
        })
        self._snapshot()
        self.close()
        logger.info("Game seed=%d over at tick %d: %s (%s)",
                    self.config.seed, event.tick, outcome.winner.value, outcome.reason.value)
        return event


# =============================================================================
# SETUP
# =============================================================================

def new_game(game_map: Map, config: GameConfig, setting: str = "default",
             text_only: bool = True, snapshots: bool = False) -> GameSession:
    """
    Sample roles, spawns and tasks from the seeded RNG and emit the setup events.

    Raises:
        GameConfigError: k tasks cannot be anchored to distinct task rooms
    """
    if config.tasks_per_goose > len(game_map.task_rooms):
        raise GameConfigError(
            f"Cannot place {config.tasks_per_goose} tasks per agent in "
            f"{len(game_map.task_rooms)} task rooms"
        )

    header = GameLogHeader(
        map_id=game_map.name,
        map_hash=map_digest(game_map),
        seed=config.seed,
        config=config,
        setting=setting,
        text_only=text_only,
    )
    session = GameSession(game_map, config, header, snapshots=snapshots)
    rng = session.rng

    players = config.names()
    ducks = set(rng.sample(players, config.n_ducks))
    spawn = {player: rng.choice(game_map.rooms) for player in players}

    session.emit(EventKind.GAME_START, {"players": players, "spawn": spawn})
    for player in players:
        role = Role.DUCK if player in ducks else Role.GOOSE
        session.emit(EventKind.ROLE_ASSIGNED, {"player": player, "role": role.value})
    for player in players:
        rooms = rng.sample(list(game_map.task_rooms), config.tasks_per_goose)
        for task_id, room in enumerate(rooms):
            session.emit(EventKind.TASK_ASSIGNED, {
                "player": player,
                "task_id": task_id,
                "room": room,
                "fake": player in ducks,
            })

    logger.info("New game seed=%d: %d agents, %d duck(s)", config.seed, len(players), len(ducks))
    return session


# =============================================================================
# RULES
# =============================================================================

def legal_actions(state: GameState, game_map: Map, config: GameConfig, player: str) -> list[Action]:
    """
    The legal free-roam actions of player, in a stable order:
    wait, moves, do_task, report, call_meeting, kills.

    Raises:
        UnknownPlayerError: player is not in the game
        IllegalActionError: player is dead or the phase is not free roam
    """
    if not state.has_player(player):
        raise UnknownPlayerError(player)
    agent = state.agent(player)
    if not agent.alive:
        raise IllegalActionError(f"{player} is dead")
    if state.phase != Phase.FREE_ROAM:
        raise IllegalActionError(f"No free-roam actions during {state.phase.value}")

    actions = [Action(kind="wait")]
    if agent.transit is not None:
        return actions

    room = agent.room
    actions += [Action(kind="move", target=other) for other, _ in adjacent(game_map, room)]
    if agent.task_in(room) is not None:
        actions.append(Action(kind="do_task"))
    if any(body.room == room for body in state.bodies):
        actions.append(Action(kind="report"))
    if room == game_map.emergency_room and state.meetings_used < config.meeting_budget:
        actions.append(Action(kind="call_meeting"))
    if agent.role == Role.DUCK and agent.kill_cooldown_remaining == 0:
        for other in sorted(a.id for a in state.living() if a.role == Role.GOOSE and a.room == room):
            actions.append(Action(kind="kill", target=other))
    return actions


def tally_votes(votes: Mapping[str, str], living: Optional[set[str]] = None) -> VoteOutcome:
    """
    Strict plurality: a player is ejected only with more votes than every
    other player AND more than skip.

    Raises:
        InvalidVoteError: voter or target not among the living players
    """
    if living is not None:
        for voter, target in votes.items():
            if voter not in living:
                raise InvalidVoteError(f"{voter} cannot vote")
            if target != SKIP and target not in living:
                raise InvalidVoteError(f"{voter} voted for {target}, who cannot be voted for")

    tally = dict(sorted(Counter(votes.values()).items()))
    if not votes:
        return VoteOutcome(reason="no_votes", tally=tally)

    skips = tally.get(SKIP, 0)
    player_counts = {target: count for target, count in tally.items() if target != SKIP}
    top = max(player_counts.values(), default=0)
    if top <= skips:
        return VoteOutcome(reason="skip_plurality", tally=tally)
    leaders = [target for target, count in player_counts.items() if count == top]
    if len(leaders) > 1:
        return VoteOutcome(reason="tie", tally=tally)
    return VoteOutcome(ejected=leaders[0], tally=tally)


def check_win(state: GameState, config: GameConfig, tick: Optional[int] = None) -> Optional[WinOutcome]:
    """
    Evaluated in this order: all Ducks gone, parity, tasks of living Geese
    complete, tick budget reached.
    """
    now = state.tick if tick is None else tick
    ducks = state.living_count(Role.DUCK)
    geese = state.living_count(Role.GOOSE)

    if ducks == 0:
        return WinOutcome(winner=Team.GEESE, reason=WinReason.ALL_DUCKS_EJECTED)
    if ducks >= geese:
        return WinOutcome(winner=Team.DUCKS, reason=WinReason.PARITY)

    real_tasks = [t for a in state.living() if a.role == Role.GOOSE for t in a.tasks if not t.fake]
    if real_tasks and all(t.completed for t in real_tasks):
        return WinOutcome(winner=Team.GEESE, reason=WinReason.TASKS_COMPLETE)
    if now >= config.tick_budget:
        return WinOutcome(winner=Team.GEESE, reason=WinReason.TIMEOUT)
    return None


# =============================================================================
# PHASES
# =============================================================================

def step_free_roam(session: GameSession, seats: Mapping) -> list[Event]:
    """
    One free-roam tick: transits, cooldowns, then every living agent in a
    seeded random order. Stops early on a report, a meeting call or a win.
    """
    from tools.actions.action_executor import execute

    state = session.state
    if state.phase != Phase.FREE_ROAM or session.over:
        raise IllegalActionError(f"Cannot step free roam during {state.phase.value}")
    start = len(session.log.events)

    for agent in list(state.living()):
        transit = agent.transit
        if transit is None:
            continue
        base = {"player": agent.id, "from_room": transit.from_room, "to_room": transit.to_room}
        if transit.remaining > 1:
            session.emit(EventKind.MOVE_PROGRESSED, {**base, "remaining": transit.remaining - 1})
        else:
            session.emit(EventKind.ARRIVED, base)

    for agent in list(state.living()):
        if agent.role == Role.DUCK and agent.kill_cooldown_remaining > 0:
            session.emit(EventKind.COOLDOWN_TICK, {
                "player": agent.id,
                "remaining": agent.kill_cooldown_remaining - 1,
            })

    order = [agent.id for agent in state.living()]
    session.rng.shuffle(order)

    for player in order:
        agent = state.agent(player)
        # in-transit agents have only the implicit wait
        if not agent.alive or agent.transit is not None:
            continue
        legal = legal_actions(state, session.map, session.config, player)
        decision = seats[player].choose_action(state, legal)
        execute(session, player, decision.value, fallback=decision.fallback)

        outcome = check_win(state, session.config)
        if outcome is not None:
            session.finish(outcome)
            return session.log.events[start:]
        if state.current_meeting() is not None:
            _open_discussion(session)
            return session.log.events[start:]

    session.advance_clock()
    outcome = check_win(state, session.config, tick=session.clock)
    if outcome is not None:
        session.finish(outcome)
    return session.log.events[start:]


def _open_discussion(session: GameSession) -> None:
    cancelled = {
        agent.id: agent.transit.from_room
        for agent in session.state.living()
        if agent.transit is not None
    }
    session.emit(EventKind.PHASE_CHANGED, {"phase": Phase.DISCUSSION.value, "cancelled": cancelled})


def run_meeting(session: GameSession, seats: Mapping) -> MeetingRecord:
    """
    Discussion rounds, simultaneous vote, ejection, then either GameOver or
    a respawn back into free roam.
    """
    state = session.state
    meeting = state.current_meeting()
    if state.phase != Phase.DISCUSSION or meeting is None:
        raise IllegalActionError(f"No meeting to run during {state.phase.value}")

    initiator = meeting.trigger.initiator
    rest = sorted(agent.id for agent in state.living() if agent.id != initiator)
    session.rng.shuffle(rest)
    order = [initiator] + rest
    session.emit(EventKind.SPEAKING_ORDER_FIXED, {"order": order})

    for round_number in range(1, session.config.discussion_rounds + 1):
        for speaker in order:
            decision = seats[speaker].speak(state, round_number)
            payload = {"speaker": speaker, "round": round_number, "text": str(decision.value)}
            if decision.fallback:
                payload["fallback"] = decision.fallback
            session.emit(EventKind.UTTERANCE, payload)

    session.emit(EventKind.PHASE_CHANGED, {"phase": Phase.VOTING.value})
    # every ballot is collected before any is cast
    ballots = {voter: seats[voter].vote(state) for voter in order}
    for voter in order:
        payload = {"voter": voter, "target": str(ballots[voter].value)}
        if ballots[voter].fallback:
            payload["fallback"] = ballots[voter].fallback
        session.emit(EventKind.VOTE_CAST, payload)

    session.emit(EventKind.PHASE_CHANGED, {"phase": Phase.EJECTION.value})
    result = tally_votes(meeting.votes, {a.id for a in state.living()})
    if result.ejected is not None:
        session.emit(EventKind.EJECTED, {"player": result.ejected, "tally": result.tally})
        logger.info("Meeting at tick %d ejected %s", meeting.meeting_tick, result.ejected)
    else:
        session.emit(EventKind.NO_EJECTION, {"reason": result.reason, "tally": result.tally})
        logger.info("Meeting at tick %d: no ejection (%s)", meeting.meeting_tick, result.reason)

    outcome = check_win(state, session.config)
    if outcome is not None:
        session.finish(outcome)
        return meeting

    session.advance_clock()
    outcome = check_win(state, session.config, tick=session.clock)
    if outcome is not None:
        session.finish(outcome)
        return meeting

    positions = {agent.id: session.rng.choice(session.map.rooms) for agent in state.living()}
    session.emit(EventKind.RESPAWNED, {"positions": positions})
    session.emit(EventKind.PHASE_CHANGED, {"phase": Phase.FREE_ROAM.value})
    return meeting


# =============================================================================
# FULL GAME
# =============================================================================

SeatSource = Union[Mapping[str, object], Callable[[str, Role, GameSession], object]]


def run_game(game_map: Map, config: GameConfig, seats: SeatSource, *,
             setting: str = "default", seat_labels: Optional[Mapping[str, str]] = None,
             text_only: bool = True, log_path: Optional[Union[str, Path]] = None,
             snapshots: bool = False, session_out: Optional[list] = None) -> GameLog:
    """
    Play one game to completion.

    Args:
        seats: player -> seat, or a factory (player, role, session) -> seat
               called once roles are assigned
        seat_labels: player -> binding label recorded in the log header
        log_path: stream the log to this file while playing
        snapshots: record canonical end-of-tick states on the session
        session_out: if given, the finished session is appended to it

    Returns:
        GameLog: ends with GameOver

    The streamed log file is closed however the game ends, including when
    a seat raises.
    """
    session = new_game(game_map, config, setting=setting, text_only=text_only, snapshots=snapshots)
    state = session.state
    if callable(seats):
        factory = seats
        seats = {agent.id: factory(agent.id, agent.role, session) for agent in state.agents}
    missing = [p for p in state.players if p not in seats]
    if missing:
        raise GameConfigError(f"No seat bound for {missing}")
    if seat_labels:
        session.log.header.seats = {p: seat_labels[p] for p in state.players}
    if log_path is not None:
        session.attach_writer(log_path)

    try:
        while not session.over:
            if state.phase == Phase.FREE_ROAM:
                step_free_roam(session, seats)
            elif state.phase == Phase.DISCUSSION:
                run_meeting(session, seats)
            else:
                raise IllegalActionError(f"Engine stuck in phase {state.phase.value}")
    finally:
        session.close()

    if session_out is not None:
        session_out.append(session)
    return session.log
