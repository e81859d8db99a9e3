import random

import pytest

from schema.events import EventKind
from schema.game import GameConfig, Phase, Role
from tools.engine.game_engine import new_game
from tools.eventlog.replay import iter_replay
from tools.observation.observation_builder import (
    DeadViewerError,
    build_observation,
    build_summary,
    render_text,
)


def sampled_states(logs, limit, seed=0):
    """Yield (state, viewer) for free-roam states picked at random across logs."""
    rng = random.Random(seed)
    taken = 0
    while taken < limit:
        for log in logs:
            for _, state in iter_replay(log):
                living = [a.id for a in state.living()]
                if state.phase != Phase.FREE_ROAM or not living or rng.random() > 0.02:
                    continue
                yield state, rng.choice(living)
                taken += 1
                if taken >= limit:
                    return


def test_views_never_leak_positions(ship_map, baseline_logs):
    checked = 0
    for state, viewer in sampled_states(baseline_logs, 1000):
        me = state.agent(viewer)
        observation = build_observation(state, viewer, ship_map)
        summary = observation.summary

        if me.room is not None:
            assert summary.co_located == sorted(
                a.id for a in state.living() if a.room == me.room and a.id != viewer)
            assert summary.bodies_here == sorted(b.victim for b in state.bodies if b.room == me.room)
            for move in summary.witnessed:
                assert move.room == me.room
                assert move in state.tick_buffers.witnessed_moves
        else:
            assert summary.co_located == [] and summary.bodies_here == [] and summary.witnessed == []

        others = [p for p in state.players if p != viewer]
        assert not [p for p in others if p in observation.global_view.svg]

        visible = set(summary.co_located) | set(summary.bodies_here) | {m.mover for m in summary.witnessed}
        assert not [p for p in others if p not in visible and p in observation.local_view.svg]
        checked += 1
    assert checked == 1000


def test_views_are_deterministic(ship_map, baseline_logs):
    for state, viewer in sampled_states(baseline_logs[:5], 20, seed=4):
        first = build_observation(state, viewer, ship_map)
        second = build_observation(state, viewer, ship_map)
        assert first == second
        assert render_text(first.summary) == render_text(second.summary)


def test_dead_viewer_has_no_observation(ship_map):
    session = new_game(ship_map, GameConfig(seed=2))
    session.state.agent("Bob").alive = False
    with pytest.raises(DeadViewerError):
        build_observation(session.state, "Bob", ship_map)
    with pytest.raises(KeyError):
        build_observation(session.state, "Zed", ship_map)


def test_only_ducks_see_teammates(ship_map):
    session = new_game(ship_map, GameConfig(n_agents=6, n_ducks=2, seed=1))
    state = session.state
    ducks = sorted(a.id for a in state.agents if a.role == Role.DUCK)
    for agent in state.agents:
        summary = build_summary(state, agent.id, ship_map, 2, 3)
        if agent.role == Role.DUCK:
            assert summary.teammates == [d for d in ducks if d != agent.id]
            assert summary.kill_cooldown == 5
            assert "Fellow Ducks" in render_text(summary)
        else:
            assert summary.teammates == []
            assert summary.kill_cooldown is None
            assert "Fellow Ducks" not in render_text(summary)


def test_summary_lists_own_tasks_and_exits(ship_map):
    session = new_game(ship_map, GameConfig(seed=8, task_duration=3))
    state = session.state
    summary = build_summary(state, "Alice", ship_map, 3, 3)
    assert [t.room for t in summary.tasks] == [t.room for t in state.agent("Alice").tasks]
    assert all(t.duration == 3 and t.progress == 0 for t in summary.tasks)
    assert summary.emergency_room == "cafeteria"
    assert summary.emergency_meetings_left == 3
    assert [a.room for a in summary.adjacent] == sorted(a.room for a in summary.adjacent)


def test_last_meeting_outcome_shown_only_on_respawn_tick(ship_map, baseline_logs):
    seen = 0
    for log in baseline_logs:
        previous = None
        for event, state in iter_replay(log):
            living = state.living()
            if state.phase == Phase.FREE_ROAM and living:
                summary = build_summary(state, living[0].id, ship_map, 2, 3)
                just_respawned = (previous is not None and previous.kind == EventKind.PHASE_CHANGED
                                  and previous.payload["phase"] == "free_roam")
                if just_respawned:
                    assert summary.last_meeting_outcome == state.meetings[-1].outcome_text()
                    seen += 1
                elif state.tick != state.last_respawn_tick:
                    assert summary.last_meeting_outcome is None
            previous = event
    assert seen > 0


def test_meeting_view_lists_known_dead(ship_map, baseline_logs):
    for log in baseline_logs:
        for event, state in iter_replay(log):
            if event.kind != EventKind.UTTERANCE:
                continue
            speaker = event.payload["speaker"]
            summary = build_summary(state, speaker, ship_map, 2, 3)
            meeting = summary.meeting
            assert meeting is not None
            assert meeting.speaking_order[0] == meeting.initiator
            assert set(meeting.known_dead) == {a.id for a in state.agents if not a.alive}
            assert "MEETING at tick" in render_text(summary)
            return
    pytest.fail("no meeting in the baseline games")
