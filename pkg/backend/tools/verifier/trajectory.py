"""
tools/verifier/trajectory.py - Trajectory Reconstruction

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

Input:  a complete GameLog
Output: TrajectorySet, one AgentTrajectory per player

A pure fold: events go through the same reducer as the engine
(tools/eventlog/replay.Replayer) and positions are read off the state
after each event. Nothing here consults an RNG or a policy.

    occupancy[t]   where the agent was at the end of tick t
    presence[t]    every place it held during tick t, in order; starts from
                   occupancy[t-1] (a respawn replaces it), so rooms entered
                   and left within one tick are kept
    witnessed      at each of the agent's action events: every departure /
                   arrival earlier in that tick, in its room, by someone
                   else (exactly what its observation showed)

Corrupt logs raise ReplayError from the reducer.
"""

from schema.events import ACTION_KINDS, EventKind, GameLog
from schema.game import AgentState, GameState
from schema.trajectory import (
    DEAD,
    AgentTrajectory,
    Place,
    TaskRecord,
    TrajectorySet,
    WaitRecord,
    WitnessRecord,
)
from tools.eventlog.replay import Replayer

_ROOM_OF_ACTION = {
    EventKind.WAITED: "room",
    EventKind.MOVE_STARTED: "from_room",
    EventKind.TASK_PROGRESSED: "room",
    EventKind.KILLED: "room",
    EventKind.BODY_REPORTED: "room",
    EventKind.MEETING_CALLED: "room",
}


class _PlaceCache:
    def __init__(self):
        self._places: dict[tuple, Place] = {}

    def of(self, agent: AgentState) -> Place:
        if not agent.alive:
            return DEAD
        if agent.transit is not None:
            key = ("corridor", agent.transit.from_room, agent.transit.to_room)
        else:
            key = ("room", agent.room)
        place = self._places.get(key)
        if place is None:
            if key[0] == "corridor":
                place = Place.in_corridor(key[1], key[2])
            else:
                place = Place.in_room(key[1])
            self._places[key] = place
        return place


def reconstruct_trajectories(log: GameLog) -> TrajectorySet:
    replayer = Replayer(log.header.config)
    state: GameState = replayer.state
    places = _PlaceCache()
    trajectories: dict[str, AgentTrajectory] = {}
    # (mover, direction, room, other_room, seq) of this tick's movement
    moves_this_tick: list[tuple[str, str, str, str, int]] = []
    tick = 0

    for event in log.events:
        if event.tick != tick and trajectories:
            for agent in state.agents:
                trajectory = trajectories[agent.id]
                place = places.of(agent)
                trajectory.occupancy.append(place)
                for _ in range(tick + 1, event.tick):
                    trajectory.occupancy.append(place)
                    trajectory.presence.append([place])
                trajectory.presence.append([place])
            moves_this_tick = []
        tick = event.tick

        if event.kind in ACTION_KINDS:
            actor = event.actor()
            room = event.payload[_ROOM_OF_ACTION[event.kind]]
            for mover, direction, where, other, seq in moves_this_tick:
                if where == room and mover != actor:
                    trajectories[actor].witnessed.append(WitnessRecord(
                        tick=event.tick, seq=seq, viewer=actor, mover=mover, direction=direction,
                        room=where, other_room=other,
                    ))

        replayer.apply(event)
        payload = event.payload

        if event.kind == EventKind.GAME_START:
            for agent in state.agents:
                trajectories[agent.id] = AgentTrajectory(player=agent.id, role=agent.role,
                                                         presence=[[places.of(agent)]])
            continue
        if event.kind == EventKind.ROLE_ASSIGNED:
            trajectories[payload["player"]].role = state.agent(payload["player"]).role
            continue

        if event.kind == EventKind.MOVE_STARTED:
            moves_this_tick.append((payload["player"], "departed", payload["from_room"], payload["to_room"], event.seq))
        elif event.kind == EventKind.ARRIVED:
            moves_this_tick.append((payload["player"], "arrived", payload["to_room"], payload["from_room"], event.seq))
        elif event.kind == EventKind.TASK_PROGRESSED:
            trajectories[payload["player"]].tasks.append(
                TaskRecord(tick=event.tick, seq=event.seq, room=payload["room"], task_id=payload["task_id"]))
        elif event.kind == EventKind.WAITED:
            trajectories[payload["player"]].waits.append(
                WaitRecord(tick=event.tick, seq=event.seq, room=payload["room"]))
        elif event.kind in (EventKind.KILLED, EventKind.EJECTED):
            victim = payload["target"] if event.kind == EventKind.KILLED else payload["player"]
            trajectory = trajectories[victim]
            trajectory.death_tick = event.tick
            trajectory.death_seq = event.seq
            trajectory.death_cause = "killed" if event.kind == EventKind.KILLED else "ejected"
        elif event.kind == EventKind.RESPAWNED:
            # a respawn starts the tick over in the new room
            for player in payload["positions"]:
                trajectories[player].presence[-1] = [places.of(state.agent(player))]
            continue

        for agent in state.agents:
            current = trajectories[agent.id].presence[-1]
            place = places.of(agent)
            if current[-1] != place:
                current.append(place)

    replayer.finish()
    for agent in state.agents:
        trajectories[agent.id].occupancy.append(places.of(agent))
    return TrajectorySet(final_tick=state.tick, agents=trajectories)
