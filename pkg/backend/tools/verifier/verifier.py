"""
tools/verifier/verifier.py - Claim Verification

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

Input:  Claims + the game's reconstructed trajectories
Output: exactly one Verdict per claim, with evidence

    verify_claim(claim, window, trajectories, ...) -> Verdict
    is_grounded(claim, trajectories, window, ...)  -> GroundingRecord
    verify_game(log, claims, settings)             -> [Verdict, ...]

Results:

    true          the trajectory shows it
    near_miss     a "the whole time" claim that held for some but not most
                  of the window
    wrong_room    the right activity / company, but in another room
    false         contradicted
    unverifiable  no time window, subject already dead, or an accusation /
                  defense (those are judged on their two axes instead)

Evidence strings cite event seqs ("seq 41 Killed") or occupancy facts
("Bob@12 medbay"); every verdict other than unverifiable has some.
"""

import logging
from typing import Optional, Union

from schema.claims import SPATIAL_TYPES, Claim, GroundingRecord, TickWindow, Unresolvable, Verdict
from schema.evaluation import EvaluationSettings
from schema.events import GameLog
from schema.game import MeetingRecord, Role
from schema.trajectory import AgentTrajectory, TrajectorySet
from tools.claims.temporal import resolve_temporal
from tools.eventlog.replay import meetings_from_log
from tools.verifier.trajectory import reconstruct_trajectories

logger = logging.getLogger("verifier")

Window = Union[TickWindow, Unresolvable]


def _verdict(claim: Claim, result: str, evidence: Optional[list[str]] = None,
             window: Optional[TickWindow] = None, note: Optional[str] = None, **axes) -> Verdict:
    return Verdict(claim_id=claim.claim_id, speaker=claim.speaker, meeting_tick=claim.meeting_tick,
                   type=claim.type, result=result, evidence=evidence or [], window=window, note=note, **axes)


def _death_evidence(trajectory: AgentTrajectory) -> str:
    kind = "Killed" if trajectory.death_cause == "killed" else "Ejected"
    return f"seq {trajectory.death_seq} {kind} {trajectory.player} at tick {trajectory.death_tick}"


def _rooms_in_window(trajectory: AgentTrajectory, window: TickWindow) -> list[tuple[int, str]]:
    return [(tick, room) for tick in window.ticks() for room in trajectory.rooms_at(tick)]


def _occupancy_fact(trajectory: AgentTrajectory, window: TickWindow) -> str:
    seen = []
    for tick in window.ticks():
        if tick < len(trajectory.presence):
            for place in trajectory.presence[tick]:
                label = place.label()
                if label not in seen:
                    seen.append(label)
    return f"{trajectory.player}@{window.start_tick}-{window.end_tick} " + ",".join(seen)


# =============================================================================
# SPATIAL CLAIMS
# =============================================================================

def _verify_location(claim: Claim, window: TickWindow, subject: AgentTrajectory,
                     settings: EvaluationSettings) -> Verdict:
    ticks = list(window.ticks())
    hits = [tick for tick in ticks if claim.room in subject.rooms_at(tick)]
    if hits:
        evidence = [f"{subject.player}@{tick} {claim.room}" for tick in hits]
        if window.duration:
            fraction = len(hits) / len(ticks)
            if fraction < settings.near_miss_threshold:
                return _verdict(claim, "near_miss", evidence, window,
                                note=f"in {claim.room} for {len(hits)}/{len(ticks)} ticks")
        return _verdict(claim, "true", evidence, window)

    other_rooms = {room for _, room in _rooms_in_window(subject, window)}
    if len(other_rooms) == 1:
        other = next(iter(other_rooms))
        idle = [f"seq {w.seq} Waited in {w.room}" for w in subject.waits
                if w.room == other and window.start_tick <= w.tick <= window.end_tick]
        idle += [f"seq {t.seq} TaskProgressed in {t.room}" for t in subject.tasks
                 if t.room == other and window.start_tick <= t.tick <= window.end_tick]
        if idle:
            return _verdict(claim, "wrong_room", [_occupancy_fact(subject, window)] + idle, window)
    return _verdict(claim, "false", [_occupancy_fact(subject, window)], window)


def _collapse(rooms: list[str]) -> list[str]:
    collapsed: list[str] = []
    for room in rooms:
        if not collapsed or collapsed[-1] != room:
            collapsed.append(room)
    return collapsed


def _verify_route(claim: Claim, window: TickWindow, subject: AgentTrajectory) -> Verdict:
    visits = []
    for tick, room in _rooms_in_window(subject, window):
        if not visits or visits[-1][1] != room:
            visits.append((tick, room))
    wanted = _collapse(list(claim.route))
    matched = []
    position = 0
    for tick, room in visits:
        if position < len(wanted) and room == wanted[position]:
            matched.append(f"{subject.player}@{tick} {room}")
            position += 1
    if position == len(wanted):
        return _verdict(claim, "true", matched, window)
    return _verdict(claim, "false", [_occupancy_fact(subject, window)], window,
                    note=f"matched {position}/{len(wanted)} rooms in order")


def co_location_ticks(a: AgentTrajectory, b: AgentTrajectory, window: TickWindow,
                      room: Optional[str] = None) -> list[tuple[int, str]]:
    """(tick, room) pairs where both held the same room during the tick."""
    shared = []
    for tick in window.ticks():
        rooms_b = set(b.rooms_at(tick))
        for r in dict.fromkeys(a.rooms_at(tick)):
            if r in rooms_b and (room is None or r == room):
                shared.append((tick, r))
    return shared


def _witness_records(viewer: AgentTrajectory, mover: str, window: TickWindow):
    return [w for w in viewer.witnessed
            if w.mover == mover and window.start_tick <= w.tick <= window.end_tick]


def _verify_sighting(claim: Claim, window: TickWindow, subject: AgentTrajectory, target: AgentTrajectory,
                     settings: EvaluationSettings) -> Verdict:
    if target.dead_before(window.start_tick):
        return _verdict(claim, "false", [_death_evidence(target)], window,
                        note=f"{target.player} was dead before the window")
    together = co_location_ticks(subject, target, window)
    witnessed = _witness_records(subject, target.player, window) if settings.witnessed_satisfies_sighting else []

    here = [f"{subject.player}+{target.player}@{tick} {room}" for tick, room in together if room == claim.room]
    here += [f"seq {w.seq} {w.mover} {w.direction} {w.room}" for w in witnessed if w.room == claim.room]
    if here:
        return _verdict(claim, "true", here, window)

    elsewhere = [f"{subject.player}+{target.player}@{tick} {room}" for tick, room in together]
    elsewhere += [f"seq {w.seq} {w.mover} {w.direction} {w.room}" for w in witnessed]
    if elsewhere:
        return _verdict(claim, "wrong_room", elsewhere, window)
    return _verdict(claim, "false", [_occupancy_fact(subject, window), _occupancy_fact(target, window)], window)


def _verify_activity(claim: Claim, window: TickWindow, subject: AgentTrajectory) -> Verdict:
    in_window = range(window.start_tick, window.end_tick + 1)
    matches: list[tuple[str, str]] = []     # (room, evidence)
    if claim.activity == "task":
        matches = [(t.room, f"seq {t.seq} TaskProgressed {t.room}") for t in subject.tasks if t.tick in in_window]
    elif claim.activity == "waiting":
        matches = [(w.room, f"seq {w.seq} Waited {w.room}") for w in subject.waits if w.tick in in_window]
    else:
        for tick in window.ticks():
            if tick >= len(subject.presence):
                continue
            for place in subject.presence[tick]:
                if place.kind != "corridor":
                    continue
                fact = f"{subject.player}@{tick} {place.label()}"
                if claim.room in (place.from_room, place.to_room):
                    matches.append((claim.room, fact))
                else:
                    matches.append((place.from_room, fact))

    here = [evidence for room, evidence in matches if room == claim.room]
    if here:
        return _verdict(claim, "true", here, window)
    if matches:
        return _verdict(claim, "wrong_room", [evidence for _, evidence in matches], window)
    return _verdict(claim, "false", [_occupancy_fact(subject, window)], window,
                    note=f"no {claim.activity} by {subject.player} in the window")


# =============================================================================
# ACCUSATIONS / DEFENSES
# =============================================================================

def is_grounded(claim: Claim, trajectories: TrajectorySet, window: TickWindow,
                meeting_claims: Optional[list[Claim]] = None,
                verdicts: Optional[dict[str, Verdict]] = None,
                settings: EvaluationSettings = EvaluationSettings()) -> GroundingRecord:
    """
    Could the accuser (defender) have seen anything about the target in the
    segment? Co-location, a witnessed movement, or a verified-true spatial
    claim of theirs about the target in the same meeting.
    """
    accuser = claim.subject
    target = claim.target if claim.type == "accusation" else claim.defended
    record = GroundingRecord(accuser=accuser, target=target)
    if accuser not in trajectories.agents or target not in trajectories.agents:
        return record
    a, b = trajectories.of(accuser), trajectories.of(target)
    record.co_location_ticks = sorted({tick for tick, _ in co_location_ticks(a, b, window)})
    record.witnessed_ticks = sorted({w.tick for w in _witness_records(a, target, window)})
    verdicts = verdicts or {}
    for other in meeting_claims or []:
        if other.type not in SPATIAL_TYPES or other.speaker != accuser:
            continue
        if other.meeting_tick != claim.meeting_tick:
            continue
        if target not in (other.subject, other.target):
            continue
        verdict = verdicts.get(other.claim_id)
        if verdict is not None and verdict.result == "true":
            record.supporting_claims.append(other.claim_id)
    return record


def _grounding_evidence(record: GroundingRecord) -> list[str]:
    evidence = [f"{record.accuser}+{record.target}@{tick} co-located" for tick in record.co_location_ticks]
    evidence += [f"{record.accuser} witnessed {record.target}@{tick}" for tick in record.witnessed_ticks]
    evidence += [f"claim {claim_id} true" for claim_id in record.supporting_claims]
    return evidence


# =============================================================================
# DISPATCH
# =============================================================================

def verify_claim(claim: Claim, window: Window, trajectories: TrajectorySet,
                 settings: EvaluationSettings = EvaluationSettings(),
                 segment: Optional[TickWindow] = None, meeting_claims: Optional[list[Claim]] = None,
                 verdicts: Optional[dict[str, Verdict]] = None) -> Verdict:
    """
    One claim against the trajectories. `segment` (the meeting's whole
    free-roam segment) and the same meeting's claims/verdicts are needed
    for accusations and defenses only.
    """
    if claim.type in ("accusation", "defense"):
        segment = segment if segment is not None else (window if isinstance(window, TickWindow) else None)
        if segment is None:
            return _verdict(claim, "unverifiable", note="no segment for grounding",
                            grounded=False if claim.type == "accusation" else None)
        record = is_grounded(claim, trajectories, segment, meeting_claims, verdicts, settings)
        axes = {"grounded": record.grounded(), "grounding": record}
        if claim.type == "accusation":
            target = trajectories.agents.get(claim.target)
            axes["outcome_correct"] = target is not None and target.role == Role.DUCK
        return _verdict(claim, "unverifiable", _grounding_evidence(record), segment, **axes)

    if isinstance(window, Unresolvable):
        return _verdict(claim, "unverifiable", note=window.reason)
    if claim.subject not in trajectories.agents:
        return _verdict(claim, "unverifiable", window=window, note=f"unknown subject {claim.subject}")
    subject = trajectories.of(claim.subject)
    if subject.dead_before(window.start_tick):
        return _verdict(claim, "unverifiable", [_death_evidence(subject)], window,
                        note=f"{subject.player} was dead before the window")

    if claim.type == "location":
        return _verify_location(claim, window, subject, settings)
    if claim.type == "route":
        return _verify_route(claim, window, subject)
    if claim.type == "sighting":
        if claim.target not in trajectories.agents:
            return _verdict(claim, "unverifiable", window=window, note=f"unknown target {claim.target}")
        return _verify_sighting(claim, window, subject, trajectories.of(claim.target), settings)
    if claim.type == "activity":
        return _verify_activity(claim, window, subject)
    return _verdict(claim, "unverifiable", window=window, note=f"no rule for {claim.type}")


def segment_window(meeting: MeetingRecord) -> TickWindow:
    return TickWindow(start_tick=meeting.segment_start, end_tick=meeting.meeting_tick, rule="segment")


def verify_game(log: GameLog, claims: list[Claim], settings: EvaluationSettings = EvaluationSettings(),
                trajectories: Optional[TrajectorySet] = None) -> list[Verdict]:
    """
    Verdicts for every claim of a game, in claim order. Spatial claims are
    judged first so accusations can lean on them.
    """
    trajectories = trajectories if trajectories is not None else reconstruct_trajectories(log)
    meetings = {m.meeting_tick: m for m in meetings_from_log(log)}
    by_meeting: dict[int, list[Claim]] = {}
    for claim in claims:
        by_meeting.setdefault(claim.meeting_tick, []).append(claim)

    verdicts: dict[str, Verdict] = {}
    for claim in claims:
        if claim.type not in SPATIAL_TYPES:
            continue
        meeting = meetings.get(claim.meeting_tick)
        if meeting is None:
            verdicts[claim.claim_id] = _verdict(claim, "unverifiable", note="no meeting at that tick")
            continue
        window = resolve_temporal(claim.temporal, meeting, settings)
        verdicts[claim.claim_id] = verify_claim(claim, window, trajectories, settings)

    for claim in claims:
        if claim.type in SPATIAL_TYPES:
            continue
        meeting = meetings.get(claim.meeting_tick)
        if meeting is None:
            verdicts[claim.claim_id] = _verdict(claim, "unverifiable", note="no meeting at that tick")
            continue
        segment = segment_window(meeting)
        verdicts[claim.claim_id] = verify_claim(claim, segment, trajectories, settings, segment=segment,
                                                meeting_claims=by_meeting[claim.meeting_tick],
                                                verdicts=verdicts)

    logger.info("Verified %d claims", len(claims))
    return [verdicts[claim.claim_id] for claim in claims]
