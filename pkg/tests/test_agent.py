import base64
from types import SimpleNamespace
from unittest.mock import MagicMock, patch

import pytest

from schema.agent import AgentMemory, MeetingMemory, PositionEntry
from schema.events import ACTION_KINDS, EventKind
from schema.game import SKIP, Action, GameConfig, MeetingRecord, MeetingTrigger, Phase, Role, TranscriptLine
from schema.run_spec import ModelEndpoint, RunSpec
from tools.agent.agent_process import (
    IllegalChoiceError,
    ModelPolicy,
    ModelTransportError,
    MultipleActionsError,
    ResponseParseError,
    UnknownActionError,
    UnknownVoteError,
    parse_response,
)
from tools.agent.memory import memory_digest, record_action, rooms_since, update_memory
from tools.agent.policy import AgentSeat
from tools.agent.scripted import (
    StalkerDuck,
    TaskGoose,
    baseline_binding,
    heard_accusations,
    make_scripted,
)
from tools.business_logic.evaluation_flow import make_seat
from tools.claims.claim_dsl import parse_annotations, to_annotation
from tools.engine.game_engine import legal_actions, new_game, run_game
from tools.observation.observation_builder import build_observation

LEGAL = [
    Action(kind="wait"),
    Action(kind="move", target="medbay"),
    Action(kind="move", target="weapons"),
    Action(kind="do_task"),
    Action(kind="kill", target="Bob"),
]


def reply(content):
    return SimpleNamespace(choices=[SimpleNamespace(message=SimpleNamespace(content=content))])


def mock_client(*contents):
    client = MagicMock()
    client.chat.completions.create.side_effect = [reply(c) for c in contents]
    return client


@pytest.fixture
def fresh_game(ship_map):
    return new_game(ship_map, GameConfig(seed=1))


# =============================================================================
# RESPONSE PARSING
# =============================================================================

@pytest.mark.parametrize("text, expected", [
    ("wait", Action(kind="wait")),
    ("move(medbay)", Action(kind="move", target="medbay")),
    ("Move(Med Bay)", Action(kind="move", target="medbay")),
    ("```\ndo_task()\n```", Action(kind="do_task")),
    ("kill(bob)", Action(kind="kill", target="Bob")),
    ("I will move(weapons)", Action(kind="move", target="weapons")),
    ("move(medbay) | say(heading to medbay)", Action(kind="move", target="medbay", say="heading to medbay")),
])
def test_parse_free_roam(ship_map, text, expected):
    assert parse_response(Phase.FREE_ROAM, text, legal=LEGAL, game_map=ship_map) == expected


@pytest.mark.parametrize("text, error", [
    ("move(medbay) then wait", MultipleActionsError),
    ("dance()", UnknownActionError),
    ("", UnknownActionError),
    ("move(storage)", IllegalChoiceError),
    ("report", IllegalChoiceError),
    ("move", ResponseParseError),
    ("wait(now)", ResponseParseError),
    ("wait | shout(hi)", ResponseParseError),
])
def test_parse_free_roam_errors(ship_map, text, error):
    with pytest.raises(error) as raised:
        parse_response(Phase.FREE_ROAM, text, legal=LEGAL, game_map=ship_map)
    assert raised.value.reply == text


def test_parse_votes_and_speech():
    living = ["Alice", "Bob"]
    assert parse_response(Phase.VOTING, "Bob", candidates=living) == "Bob"
    assert parse_response(Phase.VOTING, "  SKIP ", candidates=living) == SKIP
    with pytest.raises(UnknownVoteError):
        parse_response(Phase.VOTING, "I think Bob", candidates=living)
    with pytest.raises(UnknownVoteError):
        parse_response(Phase.VOTING, "Zed", candidates=living)
    assert parse_response(Phase.DISCUSSION, "  I was in medbay.  ") == "I was in medbay."
    with pytest.raises(ResponseParseError):
        parse_response(Phase.EJECTION, "anything")


# =============================================================================
# SEATS AND FALLBACKS
# =============================================================================

class ScriptedReplies:
    """A policy that raises or returns, one entry per call."""

    def __init__(self, *outcomes):
        self.outcomes = list(outcomes)
        self.calls = 0

    def _next(self):
        self.calls += 1
        outcome = self.outcomes.pop(0) if self.outcomes else ResponseParseError("out of replies")
        if isinstance(outcome, Exception):
            raise outcome
        return outcome

    def act(self, observation, memory, legal):
        return self._next()

    def speak(self, observation, memory, transcript):
        return self._next()

    def vote(self, observation, memory, transcript):
        return self._next()


def seat_for(session, policy, player="Alice"):
    return AgentSeat(player, policy, session.map, session.config)


def test_action_falls_back_to_wait_after_three_attempts(fresh_game):
    policy = ScriptedReplies()
    seat = seat_for(fresh_game, policy)
    legal = legal_actions(fresh_game.state, fresh_game.map, fresh_game.config, "Alice")
    decision = seat.choose_action(fresh_game.state, legal)
    assert decision.value == Action(kind="wait")
    assert decision.attempts == 3
    assert decision.fallback.startswith("ResponseParseError:")
    assert policy.calls == 3


def test_illegal_choice_is_retried(fresh_game):
    policy = ScriptedReplies(Action(kind="kill", target="Bob"), Action(kind="wait", say="hello"))
    seat = seat_for(fresh_game, policy)
    legal = legal_actions(fresh_game.state, fresh_game.map, fresh_game.config, "Alice")
    decision = seat.choose_action(fresh_game.state, legal)
    assert decision.value == Action(kind="wait", say="hello")
    assert decision.attempts == 2
    assert decision.fallback is None
    assert seat.memory.actions[-1].kind == "wait"


def test_speech_and_vote_fallbacks(fresh_game):
    seat = seat_for(fresh_game, ScriptedReplies(*[ModelTransportError("timeout")] * 3))
    decision = seat.speak(fresh_game.state, 1)
    assert decision.value == ""
    assert decision.fallback.startswith("ModelTransportError:")

    seat = seat_for(fresh_game, ScriptedReplies("Zed", "nobody", "Carol"))
    decision = seat.vote(fresh_game.state)
    assert decision.value == SKIP
    assert decision.fallback.startswith("UnknownVoteError:")
    assert decision.attempts == 3

    seat = seat_for(fresh_game, ScriptedReplies("Skip"))
    assert seat.vote(fresh_game.state).value == SKIP


def test_seat_feeds_memory(fresh_game):
    seat = seat_for(fresh_game, ScriptedReplies(Action(kind="wait")))
    legal = legal_actions(fresh_game.state, fresh_game.map, fresh_game.config, "Alice")
    seat.choose_action(fresh_game.state, legal)
    room = fresh_game.state.agent("Alice").room
    assert [p.room for p in seat.memory.positions] == [room]


# =============================================================================
# MODEL POLICY
# =============================================================================

def model_policy(session, client, supports_images=False, player="Alice"):
    endpoint = ModelEndpoint(model="test-model", supports_images=supports_images)
    role = session.state.agent(player).role
    return ModelPolicy(endpoint, player, role, session.map, session.config, client=client)


def test_model_policy_parses_the_reply(fresh_game):
    client = mock_client("wait")
    policy = model_policy(fresh_game, client)
    observation = build_observation(fresh_game.state, "Alice", fresh_game.map, with_views=False)
    legal = legal_actions(fresh_game.state, fresh_game.map, fresh_game.config, "Alice")

    assert policy.act(observation, AgentMemory(player="Alice"), legal) == Action(kind="wait")
    assert policy.calls == 1
    kwargs = client.chat.completions.create.call_args.kwargs
    assert kwargs["model"] == "test-model"
    system, user = kwargs["messages"]
    assert "Alice" in system["content"]
    assert "You are Alice" in user["content"]
    assert "Available actions: wait" in user["content"]


def raster_only_client(*contents):
    """Answers like a vision endpoint: image parts must be PNG, JPEG, WEBP or GIF."""
    replies = iter(contents)

    def create(**kwargs):
        for part in kwargs["messages"][1]["content"]:
            if part["type"] == "image_url":
                mime = part["image_url"]["url"].split(";", 1)[0]
                if mime not in ("data:image/png", "data:image/jpeg", "data:image/webp", "data:image/gif"):
                    raise ValueError("Error code: 400 - invalid_image_format")
        return reply(next(replies))

    client = MagicMock()
    client.chat.completions.create.side_effect = create
    return client


def test_model_policy_sends_both_views_as_images(fresh_game):
    client = raster_only_client("wait")
    policy = model_policy(fresh_game, client, supports_images=True)
    observation = build_observation(fresh_game.state, "Alice", fresh_game.map)
    legal = legal_actions(fresh_game.state, fresh_game.map, fresh_game.config, "Alice")
    assert policy.act(observation, AgentMemory(player="Alice"), legal) == Action(kind="wait")

    content = client.chat.completions.create.call_args.kwargs["messages"][1]["content"]
    assert [part["type"] for part in content] == ["text", "image_url", "image_url"]
    for part in content[1:]:
        url = part["image_url"]["url"]
        assert url.startswith("data:image/png;base64,")
        assert base64.b64decode(url.split(",", 1)[1]).startswith(b"\x89PNG\r\n\x1a\n")
    # the observation keeps its vector views
    assert observation.global_view.svg.startswith("<svg")


def test_rejected_reply_is_quoted_back(fresh_game):
    client = mock_client("dance()", "wait")
    seat = AgentSeat("Alice", model_policy(fresh_game, client), fresh_game.map, fresh_game.config)
    legal = legal_actions(fresh_game.state, fresh_game.map, fresh_game.config, "Alice")
    decision = seat.choose_action(fresh_game.state, legal)
    assert decision.value == Action(kind="wait")
    assert decision.attempts == 2
    second = client.chat.completions.create.call_args_list[1].kwargs["messages"][1]["content"]
    assert "'dance()' was rejected" in second


def test_duck_prompt_names_teammates(ship_map):
    session = new_game(ship_map, GameConfig(n_ducks=2, seed=4))
    ducks = sorted(a.id for a in session.state.agents if a.role == Role.DUCK)
    endpoint = ModelEndpoint(model="test-model")
    policy = ModelPolicy(endpoint, ducks[0], Role.DUCK, ship_map, session.config,
                         teammates=[ducks[1]], client=MagicMock())
    assert "DUCK" in policy.system_prompt
    assert ducks[1] in policy.system_prompt


def test_missing_key_is_a_transport_error(fresh_game, monkeypatch):
    monkeypatch.delenv("GOOSE_DUCK_TEST_KEY", raising=False)
    endpoint = ModelEndpoint(model="test-model", api_key_env="GOOSE_DUCK_TEST_KEY")
    policy = ModelPolicy(endpoint, "Alice", Role.GOOSE, fresh_game.map, fresh_game.config)
    observation = build_observation(fresh_game.state, "Alice", fresh_game.map, with_views=False)
    with pytest.raises(ModelTransportError, match="GOOSE_DUCK_TEST_KEY"):
        policy.act(observation, AgentMemory(player="Alice"), [Action(kind="wait")])


def test_client_is_built_from_the_environment(fresh_game, monkeypatch):
    monkeypatch.setenv("GOOSE_DUCK_TEST_KEY", "sk-test")
    endpoint = ModelEndpoint(model="test-model", api_key_env="GOOSE_DUCK_TEST_KEY")
    client = mock_client("wait")
    with patch("tools.agent.agent_process._create_client", return_value=client) as create:
        policy = ModelPolicy(endpoint, "Alice", Role.GOOSE, fresh_game.map, fresh_game.config)
        observation = build_observation(fresh_game.state, "Alice", fresh_game.map, with_views=False)
        policy.act(observation, AgentMemory(player="Alice"), [Action(kind="wait")])
    create.assert_called_once_with(endpoint)


def test_transport_failure_mid_game_becomes_fallbacks(ship_map):
    config = GameConfig(seed=6, tick_budget=20)
    broken = MagicMock()
    broken.chat.completions.create.side_effect = ConnectionError("connection reset")
    spec = RunSpec(config=config)

    def seats(player, role, session):
        if player == "Alice":
            policy = ModelPolicy(ModelEndpoint(model="test-model"), player, role, ship_map, config, client=broken)
            return AgentSeat(player, policy, ship_map, config)
        index = session.state.players.index(player)
        return make_seat(spec, "baseline", player, role, index, session)

    log = run_game(ship_map, config, seats)
    assert log.game_over() is not None
    alice = [e for e in log.events
             if (e.kind in ACTION_KINDS and e.actor() == "Alice")
             or e.payload.get("speaker") == "Alice" or e.payload.get("voter") == "Alice"]
    assert alice
    for event in alice:
        assert event.payload["fallback"].startswith("ModelTransportError:")
        if event.kind in ACTION_KINDS:
            assert event.kind == EventKind.WAITED
        if event.kind == EventKind.UTTERANCE:
            assert event.payload["text"] == ""
        if event.kind == EventKind.VOTE_CAST:
            assert event.payload["target"] == SKIP


# =============================================================================
# MEMORY
# =============================================================================

def test_memory_rejects_foreign_observations(fresh_game):
    observation = build_observation(fresh_game.state, "Bob", fresh_game.map, with_views=False)
    with pytest.raises(ValueError):
        update_memory(AgentMemory(player="Alice"), observation)


def test_memory_is_idempotent_per_observation(fresh_game):
    observation = build_observation(fresh_game.state, "Alice", fresh_game.map, with_views=False)
    memory = update_memory(AgentMemory(player="Alice"), observation)
    once = memory.model_copy(deep=True)
    update_memory(memory, observation)
    assert memory == once


def test_memory_digest():
    memory = AgentMemory(player="Alice")
    assert memory_digest(memory) == "MEMORY:\n- nothing yet"

    record_action(memory, 3, "cafeteria", Action(kind="move", target="medbay"))
    record_action(memory, 9, "medbay", Action(kind="do_task"))
    digest = memory_digest(memory)
    assert "- tick 3: you chose move(medbay)" in digest
    assert "- tick 9: you chose do_task" in digest
    windowed = memory_digest(memory, window=2, now=10)
    assert "tick 3" not in windowed and "tick 9" in windowed


def test_rooms_since_collapses_repeats():
    memory = AgentMemory(player="Alice")
    memory.positions = [
        PositionEntry(tick=1, room="cafeteria"),
        PositionEntry(tick=2, corridor=("cafeteria", "medbay")),
        PositionEntry(tick=3, room="medbay"),
        PositionEntry(tick=4, room="medbay"),
        PositionEntry(tick=5, room="cafeteria"),
    ]
    assert rooms_since(memory, 0) == ["cafeteria", "medbay", "cafeteria"]
    assert rooms_since(memory, 3) == ["medbay", "cafeteria"]


# =============================================================================
# SCRIPTED BASELINES
# =============================================================================

def test_baseline_binding():
    assert baseline_binding(Role.DUCK, 4) == "stalker_duck"
    assert [baseline_binding(Role.GOOSE, i) for i in range(4)] == [
        "task_goose", "buddy_goose", "random_walker", "task_goose"]
    with pytest.raises(KeyError):
        make_scripted("chess_engine", "Alice", Role.GOOSE, None, GameConfig())


def test_task_goose_works_or_walks_toward_a_task(ship_map):
    for seed in range(10):
        session = new_game(ship_map, GameConfig(seed=seed))
        goose = next(a for a in session.state.agents if a.role == Role.GOOSE)
        policy = TaskGoose(goose.id, Role.GOOSE, ship_map, session.config)
        observation = build_observation(session.state, goose.id, ship_map, with_views=False)
        legal = legal_actions(session.state, ship_map, session.config, goose.id)
        action = policy.act(observation, AgentMemory(player=goose.id), legal)
        if goose.task_in(goose.room) is not None:
            assert action == Action(kind="do_task")
        else:
            assert action.kind == "move" and action in legal


def test_stalker_duck_kills_a_lone_goose_then_flees(ship_map):
    session = new_game(ship_map, GameConfig(seed=2, kill_cooldown=0))
    state = session.state
    duck = next(a for a in state.agents if a.role == Role.DUCK)
    victim = next(a for a in state.agents if a.role == Role.GOOSE)
    for agent in state.agents:
        agent.room = "storage" if agent.id in (duck.id, victim.id) else "cafeteria"

    policy = StalkerDuck(duck.id, Role.DUCK, ship_map, session.config)
    memory = AgentMemory(player=duck.id)
    observation = build_observation(state, duck.id, ship_map, with_views=False)
    legal = legal_actions(state, ship_map, session.config, duck.id)
    kill = policy.act(observation, memory, legal)
    assert kill == Action(kind="kill", target=victim.id)
    record_action(memory, state.tick, "storage", kill)

    victim.alive = False
    observation = build_observation(state, duck.id, ship_map, with_views=False)
    legal = legal_actions(state, ship_map, session.config, duck.id)
    assert policy.act(observation, memory, legal).kind == "move"

    assert StalkerDuck._just_killed(memory)
    # a meeting called since the kill ends the getaway
    memory.meetings.append(MeetingMemory(meeting_tick=state.tick, reason="body_report", initiator=victim.id))
    assert not StalkerDuck._just_killed(memory)


def test_stalker_duck_votes_for_whoever_it_accused(fresh_game):
    state = fresh_game.state
    duck = next(a for a in state.agents if a.role == Role.DUCK)
    accuser = next(a for a in state.agents if a.role == Role.GOOSE)
    state.meetings.append(MeetingRecord(
        trigger=MeetingTrigger(kind="emergency", initiator=accuser.id, room=accuser.room),
        meeting_tick=state.tick, speaking_order=[a.id for a in state.living()]))
    state.phase = Phase.DISCUSSION
    transcript = [
        TranscriptLine(speaker=duck.id, round=1, text="Nothing to report from me."),
        TranscriptLine(speaker=accuser.id, round=1, text="It was them. " + to_annotation(
            type="accusation", accuser=accuser.id, target=duck.id, confidence="strong")),
    ]
    policy = StalkerDuck(duck.id, Role.DUCK, fresh_game.map, fresh_game.config)
    memory = AgentMemory(player=duck.id)
    observation = build_observation(state, duck.id, fresh_game.map, with_views=False)
    transcript.append(TranscriptLine(speaker=duck.id, round=2,
                                     text=policy.speak(observation, memory, transcript)))
    assert heard_accusations(transcript)[-1] == (duck.id, accuser.id, "strong")

    state.phase = Phase.VOTING
    observation = build_observation(state, duck.id, fresh_game.map, with_views=False)
    # a new instance reaches the same vote from the transcript alone
    for voter in (policy, StalkerDuck(duck.id, Role.DUCK, fresh_game.map, fresh_game.config)):
        assert voter.vote(observation, memory, transcript) == accuser.id


def test_stalker_duck_holds_off_with_witnesses(ship_map):
    session = new_game(ship_map, GameConfig(seed=2, kill_cooldown=0))
    state = session.state
    for agent in state.agents:
        agent.room = "storage"
    duck = next(a for a in state.agents if a.role == Role.DUCK)
    policy = StalkerDuck(duck.id, Role.DUCK, ship_map, session.config)
    observation = build_observation(state, duck.id, ship_map, with_views=False)
    legal = legal_actions(state, ship_map, session.config, duck.id)
    assert policy.act(observation, AgentMemory(player=duck.id), legal).kind != "kill"


def test_heard_accusations():
    transcript = [
        TranscriptLine(speaker="Bob", round=1, text="I saw nothing."),
        TranscriptLine(speaker="Bob", round=2, text="Eve did it. "
                       + to_annotation(type="accusation", accuser="Bob", target="Eve", confidence="strong")),
        TranscriptLine(speaker="Eve", round=2, text="Broken @claim{type=accusation;target"),
        TranscriptLine(speaker="Diana", round=2, text="Maybe Bob. "
                       + to_annotation(type="accusation", target="Bob")),
    ]
    assert heard_accusations(transcript) == [("Bob", "Eve", "strong"), ("Diana", "Bob", "moderate")]


def test_scripted_speech_carries_parseable_claims(ship_map, baseline_logs):
    for log in baseline_logs[:10]:
        for event in log.events:
            if event.kind == EventKind.UTTERANCE and "@claim" in event.payload["text"]:
                annotations = parse_annotations(event.payload["text"])
                assert annotations
                for _, pairs in annotations:
                    assert pairs["type"] in {"location", "route", "sighting", "activity", "accusation", "defense"}
