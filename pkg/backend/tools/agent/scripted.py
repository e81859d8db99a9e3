"""
tools/agent/scripted.py - Scripted Baseline Policies

Four rule-based policies for tests and baselines. They need no model and
speak natural sentences carrying @claim annotations, so a whole game can
be verified through the structured claim channel.

    random_walker   any legal action except kill
    task_goose      report > do_task > walk to the nearest open task > wait
    buddy_goose     follows a player it saw leave its room, else task_goose
    stalker_duck    kills lone Geese, leaves the room right after, fakes
                    tasks; plants one false location claim per meeting

Each policy draws from its own stream seeded with "<game seed>:<player>",
so the same inputs always give the same outputs.

Baseline binding: Ducks play stalker_duck; Geese by seat index i play
task_goose, buddy_goose, random_walker for i % 3 = 0, 1, 2.
"""

import random
from typing import Optional

from schema.agent import AgentMemory
from schema.game import SKIP, Action, GameConfig, Role, TranscriptLine
from schema.map import Map
from schema.observation import Observation
from tools.agent.memory import last_meeting, rooms_since
from tools.claims.claim_dsl import ClaimSyntaxError, parse_annotations, to_annotation
from tools.map.map_graph import shortest_travel, travel_costs_from

BASELINE_GEESE = ("task_goose", "buddy_goose", "random_walker")
BASELINE_DUCK = "stalker_duck"
MAX_SIGHTINGS = 2
THIS_ROUND = "this round"


def _name(room: str) -> str:
    return room.replace("_", " ")


def _moves(legal: list[Action]) -> list[Action]:
    return [a for a in legal if a.kind == "move"]


def _find(legal: list[Action], kind: str) -> Optional[Action]:
    for action in legal:
        if action.kind == kind:
            return action
    return None


def heard_accusations(transcript: list[TranscriptLine]) -> list[tuple[str, str, str]]:
    """(accuser, target, confidence) of every accusation annotation so far, in order."""
    found = []
    for line in transcript:
        try:
            annotations = parse_annotations(line.text)
        except ClaimSyntaxError:
            continue
        for _, pairs in annotations:
            if pairs.get("type", "").lower() != "accusation" or "target" not in pairs:
                continue
            accuser = pairs.get("accuser") or pairs.get("subject") or line.speaker
            found.append((accuser, pairs["target"], pairs.get("confidence", "moderate").lower()))
    return found


class ScriptedPolicy:
    """Shared plumbing; subclasses override act / speak / vote."""

    name = "scripted"

    def __init__(self, player: str, role: Role, game_map: Map, config: GameConfig):
        self.player = player
        self.role = role
        self.map = game_map
        self.config = config
        self.rng = random.Random(f"{config.seed}:{player}")

    # ---- movement helpers ------------------------------------------------

    def _toward(self, room: str, targets: list[str]) -> Optional[Action]:
        """First hop toward the cheapest target (ties by room name)."""
        if not targets or room is None:
            return None
        costs = travel_costs_from(self.map, room)
        goal = min(targets, key=lambda r: (costs.get(r, float("inf")), r))
        if goal == room:
            return None
        path, _ = shortest_travel(self.map, room, goal)
        return Action(kind="move", target=path[1])

    def _task_step(self, observation: Observation, legal: list[Action]) -> Action:
        summary = observation.summary
        report = _find(legal, "report")
        if report is not None and self.role == Role.GOOSE:
            return report
        do_task = _find(legal, "do_task")
        if do_task is not None:
            return do_task
        open_rooms = [t.room for t in summary.tasks if not t.completed]
        step = self._toward(summary.room, open_rooms)
        if step is not None and step in legal:
            return step
        return Action(kind="wait")

    # ---- speech helpers --------------------------------------------------

    def _segment(self, observation: Observation) -> tuple[int, int]:
        meeting = observation.summary.meeting
        end = meeting.meeting_tick if meeting is not None else observation.summary.tick
        return observation.summary.segment_start, end

    def _route_sentence(self, memory: AgentMemory, start: int, end: int) -> Optional[str]:
        rooms = rooms_since(memory, start)
        if not rooms:
            return None
        if len(rooms) == 1:
            return (f"I was in {_name(rooms[0])} this round. "
                    + to_annotation(type="location", subject=self.player, room=rooms[0], temporal=THIS_ROUND))
        return (f"This round I went {', then '.join(_name(r) for r in rooms)}. "
                + to_annotation(type="route", subject=self.player, route=rooms, temporal=THIS_ROUND))

    def _sighting_sentences(self, memory: AgentMemory, start: int, end: int,
                            exclude: set[str]) -> list[str]:
        sightings: list[tuple[int, str, str]] = []
        for encounter in reversed(memory.encounters):
            if not (start <= encounter.tick <= end):
                continue
            for other in encounter.players:
                if other in exclude or any(s[1] == other for s in sightings):
                    continue
                sightings.append((encounter.tick, other, encounter.room))
                if len(sightings) == MAX_SIGHTINGS:
                    break
            if len(sightings) == MAX_SIGHTINGS:
                break
        return [
            f"I saw {other} in {_name(room)} at tick {tick}. "
            + to_annotation(type="sighting", subject=self.player, target=other, room=room, temporal=f"tick {tick}")
            for tick, other, room in sorted(sightings)
        ]

    def _task_sentence(self, memory: AgentMemory, start: int, end: int) -> Optional[str]:
        worked = [a for a in memory.actions if a.kind == "do_task" and start <= a.tick <= end and a.room]
        if not worked:
            return None
        room = worked[-1].room
        return (f"I was doing a task in {_name(room)}. "
                + to_annotation(type="activity", subject=self.player, activity="task", room=room,
                                temporal=THIS_ROUND))

    # ---- Policy ----------------------------------------------------------

    def act(self, observation: Observation, memory: AgentMemory, legal: list[Action]) -> Action:
        raise NotImplementedError

    def speak(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        return ""

    def vote(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        return SKIP


# =============================================================================
# GEESE
# =============================================================================

class GoosePolicy(ScriptedPolicy):
    """Truthful meeting behavior shared by the Goose baselines."""

    def suspect(self, observation: Observation, memory: AgentMemory) -> Optional[str]:
        """
        The last player seen with a victim this segment, else the last player
        seen next to a victim's body.
        """
        meeting = observation.summary.meeting
        if meeting is None or not meeting.victims:
            return None
        victims = set(meeting.victims)
        excluded = victims | set(meeting.known_dead) | {self.player}
        start, end = self._segment(observation)
        recent = [e for e in reversed(memory.encounters) if start <= e.tick <= end]
        for encounter in recent:
            if victims & set(encounter.players):
                candidates = sorted(p for p in encounter.players if p not in excluded)
                if candidates:
                    return candidates[0]
        for encounter in recent:
            if victims & set(encounter.bodies):
                candidates = sorted(p for p in encounter.players if p not in excluded)
                if candidates:
                    return candidates[0]
        return None

    def speak(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        meeting = observation.summary.meeting
        start, end = self._segment(observation)
        order = meeting.speaking_order if meeting is not None else [self.player]
        first_round = sum(1 for line in transcript if line.speaker == self.player) == 0
        if first_round:
            exclude = {self.player} | (set(meeting.victims) if meeting else set())
            parts = [self._route_sentence(memory, start, end)]
            parts += self._sighting_sentences(memory, start, end, exclude)
            parts.append(self._task_sentence(memory, start, end))
            parts = [p for p in parts if p]
            return " ".join(parts) if parts else "I did not see anything useful."

        suspect = self.suspect(observation, memory)
        if suspect is not None:
            return (f"I think {suspect} is the Duck. "
                    + to_annotation(type="accusation", accuser=self.player, target=suspect, confidence="strong"))
        for encounter in reversed(memory.encounters):
            if start <= encounter.tick <= end:
                buddies = sorted(p for p in encounter.players if p in order)
                if buddies:
                    return (f"{buddies[0]} was with me in {_name(encounter.room)}, I can vouch for them. "
                            + to_annotation(type="defense", defender=self.player, defended=buddies[0],
                                            basis="was with me"))
        return "I have no strong suspicion. Skipping seems safest."

    def vote(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        meeting = observation.summary.meeting
        living = set(meeting.speaking_order) if meeting is not None else set()
        suspect = self.suspect(observation, memory)
        if suspect is not None and suspect in living:
            return suspect
        for accuser, target, confidence in heard_accusations(transcript):
            if confidence != "strong":
                continue
            if target == self.player:
                return accuser if accuser in living else SKIP
            if target in living:
                return target
        return SKIP


class RandomWalker(GoosePolicy):
    name = "random_walker"

    def act(self, observation: Observation, memory: AgentMemory, legal: list[Action]) -> Action:
        options = [a for a in legal if a.kind != "kill"]
        return self.rng.choice(options)


class TaskGoose(GoosePolicy):
    name = "task_goose"

    def act(self, observation: Observation, memory: AgentMemory, legal: list[Action]) -> Action:
        return self._task_step(observation, legal)


class BuddyGoose(GoosePolicy):
    name = "buddy_goose"

    def act(self, observation: Observation, memory: AgentMemory, legal: list[Action]) -> Action:
        report = _find(legal, "report")
        if report is not None:
            return report
        departures = sorted(
            (m for m in observation.summary.witnessed if m.direction == "departed"),
            key=lambda m: m.mover,
        )
        for move in departures:
            follow = Action(kind="move", target=move.other_room)
            if follow in legal:
                return follow
        return self._task_step(observation, legal)


# =============================================================================
# DUCK
# =============================================================================

class StalkerDuck(ScriptedPolicy):
    name = "stalker_duck"

    @staticmethod
    def _just_killed(memory: AgentMemory) -> bool:
        """Its last recorded action was a kill and no meeting has been called since."""
        if not memory.actions or memory.actions[-1].kind != "kill":
            return False
        meeting = last_meeting(memory)
        return meeting is None or meeting.meeting_tick < memory.actions[-1].tick

    def act(self, observation: Observation, memory: AgentMemory, legal: list[Action]) -> Action:
        summary = observation.summary
        moves = _moves(legal)
        if self._just_killed(memory) and moves:
            return self.rng.choice(moves)

        kills = [a for a in legal if a.kind == "kill"]
        witnesses = [p for p in summary.co_located if p not in summary.teammates]
        if kills and len(witnesses) == 1 and kills[0].target == witnesses[0]:
            return kills[0]

        do_task = _find(legal, "do_task")
        if do_task is not None:
            return do_task
        fake_rooms = [t.room for t in summary.tasks if not t.completed]
        step = self._toward(summary.room, fake_rooms)
        if step is not None and step in legal:
            return step
        return self.rng.choice(moves) if moves else Action(kind="wait")

    def _lie_room(self, memory: AgentMemory, start: int, here: Optional[str]) -> Optional[str]:
        # a room entered on the meeting tick itself never reached memory
        been = set(rooms_since(memory, start)) | {here}
        for room in sorted(self.map.rooms):
            if room not in been:
                return room
        return None

    def speak(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        start, end = self._segment(observation)
        first_round = sum(1 for line in transcript if line.speaker == self.player) == 0
        if first_round:
            parts = []
            lie = self._lie_room(memory, start, observation.summary.room)
            if lie is not None:
                parts.append(f"I spent this round in {_name(lie)}. "
                             + to_annotation(type="location", subject=self.player, room=lie, temporal=THIS_ROUND))
            task = self._task_sentence(memory, start, end)
            if task:
                parts.append(task)
            return " ".join(parts) if parts else "Nothing to report from me."

        for accuser, target, _ in heard_accusations(transcript):
            if target == self.player and accuser != self.player and accuser not in observation.summary.teammates:
                return (f"{accuser} is lying to cover themselves. "
                        + to_annotation(type="accusation", accuser=self.player, target=accuser, confidence="strong"))
        return "I was busy with my tasks the whole time."

    def vote(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        meeting = observation.summary.meeting
        living = set(meeting.speaking_order) if meeting is not None else set()
        countered = [target for accuser, target, _ in heard_accusations(transcript)
                     if accuser == self.player and target in living]
        if countered:
            return countered[-1]
        teammates = set(observation.summary.teammates)
        for _, target, confidence in heard_accusations(transcript):
            if confidence != "strong":
                continue
            if target in living and target != self.player and target not in teammates:
                return target
            break
        return SKIP


# =============================================================================
# REGISTRY
# =============================================================================

SCRIPTED_POLICIES: dict[str, type[ScriptedPolicy]] = {
    "random_walker": RandomWalker,
    "task_goose": TaskGoose,
    "buddy_goose": BuddyGoose,
    "stalker_duck": StalkerDuck,
}


def scripted_policies() -> dict[str, type[ScriptedPolicy]]:
    return dict(SCRIPTED_POLICIES)


def baseline_binding(role: Role, seat_index: int) -> str:
    """The scripted policy name the "baseline" binding resolves to."""
    if role == Role.DUCK:
        return BASELINE_DUCK
    return BASELINE_GEESE[seat_index % len(BASELINE_GEESE)]


def make_scripted(name: str, player: str, role: Role, game_map: Map, config: GameConfig) -> ScriptedPolicy:
    """
    Raises:
        KeyError: unknown policy name
    """
    if name not in SCRIPTED_POLICIES:
        raise KeyError(f"Unknown scripted policy '{name}'")
    return SCRIPTED_POLICIES[name](player, role, game_map, config)
