"""
tools/agent/policy.py - Seats (Policy + Memory + Fallbacks)

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

The engine talks to seats. A seat owns one player's memory, builds that
player's observation from the live state, asks its Policy, and guarantees
an answer:

    choose_action(state, legal)   -> Decision(Action)     fallback: wait
    speak(state, round)           -> Decision(str)        fallback: ""
    vote(state)                   -> Decision(str)        fallback: skip

A policy gets 1 + max_retries attempts (default 2 retries). Every
substituted default carries its reason in Decision.fallback, which the
engine writes into the event payload.

✅ Policies see Observation + AgentMemory only, never the GameState
❌ Policies never emit events
"""

import logging
from typing import Protocol, runtime_checkable

from schema.agent import AgentMemory, Decision
from schema.game import SKIP, Action, GameConfig, GameState, TranscriptLine
from schema.map import Map
from schema.observation import Observation
from tools.agent.agent_process import (
    IllegalChoiceError,
    ModelTransportError,
    ResponseParseError,
    UnknownVoteError,
)
from tools.agent.memory import record_action, update_memory
from tools.observation.observation_builder import build_observation

logger = logging.getLogger("policy")

DEFAULT_MAX_RETRIES = 2
WAIT = Action(kind="wait")

RECOVERABLE = (ResponseParseError, ModelTransportError)


@runtime_checkable
class Policy(Protocol):
    def act(self, observation: Observation, memory: AgentMemory, legal: list[Action]) -> Action: ...

    def speak(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str: ...

    def vote(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str: ...


class AgentSeat:
    def __init__(self, player: str, policy: Policy, game_map: Map, config: GameConfig,
                 with_views: bool = False, max_retries: int = DEFAULT_MAX_RETRIES):
        self.player = player
        self.policy = policy
        self.map = game_map
        self.config = config
        self.with_views = with_views
        self.max_retries = max_retries
        self.memory = AgentMemory(player=player)

    def observe(self, state: GameState) -> Observation:
        observation = build_observation(state, self.player, self.map, task_duration=self.config.task_duration,
                                        meeting_budget=self.config.meeting_budget, with_views=self.with_views)
        update_memory(self.memory, observation)
        return observation

    def _attempt(self, call, what: str):
        """(value, None, attempts) on success, (None, reason, attempts) when every attempt failed."""
        reason = None
        for attempt in range(1, self.max_retries + 2):
            try:
                return call(), None, attempt
            except RECOVERABLE as e:
                reason = f"{type(e).__name__}: {e}"
                logger.info("%s: %s attempt %d rejected (%s)", self.player, what, attempt, reason)
        return None, reason, self.max_retries + 1

    def choose_action(self, state: GameState, legal: list[Action]) -> Decision:
        observation = self.observe(state)

        def ask() -> Action:
            action = self.policy.act(observation, self.memory, legal)
            if action.bare() not in legal:
                raise IllegalChoiceError(f"{action.render()} is not legal")
            return action

        action, reason, attempts = self._attempt(ask, "action")
        if action is None:
            action = WAIT
        room = state.agent(self.player).room
        if action.say is not None and room is None:
            action = action.bare()
        record_action(self.memory, state.tick, room, action)
        return Decision(value=action, fallback=reason, attempts=attempts)

    def speak(self, state: GameState, round_number: int) -> Decision:
        observation = self.observe(state)
        transcript = list(observation.summary.meeting.transcript) if observation.summary.meeting else []
        text, reason, attempts = self._attempt(
            lambda: str(self.policy.speak(observation, self.memory, transcript)), f"round {round_number} speech")
        if text is None:
            text = ""
        return Decision(value=text, fallback=reason, attempts=attempts)

    def vote(self, state: GameState) -> Decision:
        observation = self.observe(state)
        meeting = observation.summary.meeting
        transcript = list(meeting.transcript) if meeting else []
        candidates = list(meeting.speaking_order) if meeting else []

        def ask() -> str:
            reply = str(self.policy.vote(observation, self.memory, transcript)).strip()
            if reply.lower() == SKIP:
                return SKIP
            if reply not in candidates:
                raise UnknownVoteError(f"'{reply}' is not a living player", reply)
            return reply

        target, reason, attempts = self._attempt(ask, "vote")
        if target is None:
            target = SKIP
        return Decision(value=target, fallback=reason, attempts=attempts)
