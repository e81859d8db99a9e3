"""
tools/agent/agent_process.py - Agent Layer (Model-Driven Players)

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

This file is the MODEL BOUNDARY.

Input:  Observation + AgentMemory (+ legal actions / transcript)
Output: One Action, one utterance or one vote, parsed from a chat model reply

This file does NOT know about:
- Events / the event log
- Retries and fallbacks (tools/agent/policy.py owns those)
- Files on disk (except the prompt templates)

═══════════════════════════════════════════════════════════════════════════════
THE CONTRACT
═══════════════════════════════════════════════════════════════════════════════

parse_response(phase, text, ...) -> Action | str

    free_roam   exactly one action token, optional " | say(...)" suffix
    discussion  the text itself
    voting      a living player's exact name, or "skip" (any case)

Anything else raises a ResponseParseError subclass:

    MultipleActionsError   "move(medbay) then wait"
    UnknownActionError     "dance()"
    IllegalChoiceError     "kill(Eve)" from a Goose, move to a non-adjacent room
    UnknownVoteError       "I think Bob"

Transport problems (no key, timeout, HTTP errors) raise ModelTransportError.
Both are turned into retries / fallbacks by the seat, never into crashes.
"""

import base64
import logging
import re
from typing import Optional

from auto.auto import get_model_api_key, read_prompt_template
from schema.game import SKIP, Action, GameConfig, Phase, Role, TranscriptLine
from schema.map import Map
from schema.observation import Observation
from schema.run_spec import ModelEndpoint
from schema.agent import AgentMemory
from tools.agent.memory import memory_digest
from tools.map.map_graph import normalize_room
from tools.observation.observation_builder import render_text

logger = logging.getLogger("agent_process")

ACTION_NAMES = ("wait", "move", "do_task", "report", "call_meeting", "kill")
TARGETED = ("move", "kill")

_ACTION_TOKEN = re.compile(r"\b(wait|move|do_task|report|call_meeting|kill)\b\s*(?:\(([^()]*)\))?", re.I)
_SINGLE = re.compile(r"\s*([A-Za-z_]+)\s*(?:\(([^()]*)\))?\s*\.?\s*", re.S)
_SAY = re.compile(r"\s*say\s*\((.*)\)\s*", re.S)
_FENCE = re.compile(r"^```[a-zA-Z]*\s*|\s*```$")


class ResponseParseError(ValueError):
    """A model reply that does not fit the response format."""

    def __init__(self, message: str, reply: str = ""):
        self.reply = reply
        super().__init__(message)


class MultipleActionsError(ResponseParseError):
    pass


class UnknownActionError(ResponseParseError):
    pass


class IllegalChoiceError(ResponseParseError):
    pass


class UnknownVoteError(ResponseParseError):
    pass


class ModelTransportError(RuntimeError):
    """The endpoint could not be reached, timed out or refused the request."""


# =============================================================================
# PARSING
# =============================================================================

def _unwrap(text: str) -> str:
    text = _FENCE.sub("", str(text).strip()).strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"`":
        text = text[1:-1].strip()
    return text


def parse_response(phase: Phase, text: str, legal: Optional[list[Action]] = None,
                   candidates: Optional[list[str]] = None, game_map: Optional[Map] = None):
    """
    Parse one reply for the given phase.

    Args:
        legal: the legal actions (free roam); a parsed action outside it
               raises IllegalChoiceError
        candidates: the living players (voting)
        game_map: lets "move(Med Bay)" resolve to medbay

    Raises:
        ResponseParseError (one of its subclasses)
    """
    phase = Phase(phase)
    if phase == Phase.FREE_ROAM:
        return _parse_action(text, legal, game_map)
    if phase == Phase.DISCUSSION:
        return str(text).strip()
    if phase == Phase.VOTING:
        return _parse_vote(text, candidates)
    raise ResponseParseError(f"No replies are expected during {phase.value}", str(text))


def _parse_action(text: str, legal: Optional[list[Action]], game_map: Optional[Map]) -> Action:
    reply = str(text)
    body = _unwrap(reply)
    say = None
    if "|" in body:
        head, tail = body.split("|", 1)
        match = _SAY.fullmatch(tail)
        if match is None:
            raise ResponseParseError(f"Expected ' | say(...)' after the action, got '{tail.strip()}'", reply)
        say = match.group(1).strip() or None
        body = head

    tokens = _ACTION_TOKEN.findall(body)
    if len(tokens) > 1:
        raise MultipleActionsError(f"Expected exactly one action, found {len(tokens)}", reply)
    single = _SINGLE.fullmatch(body)
    if single is not None:
        name, argument = single.group(1).lower(), single.group(2)
    elif len(tokens) == 1:
        name, argument = tokens[0][0].lower(), tokens[0][1] or None
    else:
        raise UnknownActionError(f"No action found in '{body.strip()}'", reply)
    if name not in ACTION_NAMES:
        raise UnknownActionError(f"Unknown action '{name}'", reply)

    argument = argument.strip() if argument is not None else ""
    target = None
    if name in TARGETED:
        if not argument:
            raise ResponseParseError(f"{name} needs a target", reply)
        target = _resolve_target(name, argument, legal, game_map)
    elif argument:
        raise ResponseParseError(f"{name} takes no argument, got '{argument}'", reply)

    action = Action(kind=name, target=target, say=say)
    if legal is not None and action.bare() not in legal:
        raise IllegalChoiceError(f"{action.bare().render()} is not an available action", reply)
    return action


def _resolve_target(name: str, argument: str, legal: Optional[list[Action]], game_map: Optional[Map]) -> str:
    argument = argument.strip().strip("'\"")
    if name == "move" and game_map is not None:
        room = normalize_room(argument, game_map)
        return room if room is not None else argument
    for action in legal or []:
        if action.kind == name and action.target and action.target.lower() == argument.lower():
            return action.target
    return argument


def _parse_vote(text: str, candidates: Optional[list[str]]) -> str:
    reply = str(text)
    choice = reply.strip()
    if choice.lower() == SKIP:
        return SKIP
    if candidates is None or choice in candidates:
        return choice
    raise UnknownVoteError(f"'{choice}' is not a living player or 'skip'", reply)


# =============================================================================
# PROMPTS
# =============================================================================

VISION = ("You see everyone in your current room, bodies in it, and players leaving or entering "
          "it on the tick it happens. You cannot see into other rooms or corridors.")


def fill_template(template: str, values: dict) -> str:
    """Replace {key} placeholders; other braces (JSON examples) are left alone."""
    for key, value in values.items():
        template = template.replace("{" + key + "}", str(value))
    return template


def build_system_prompt(player: str, role: Role, config: GameConfig, teammates: list[str]) -> str:
    if role == Role.DUCK:
        role_label = "DUCK (Impostor)"
        objective = "Eliminate Geese until Ducks are at least as many as Geese, without being voted out."
        strategy = read_prompt_template("duck_strategy.txt")
        teammates_line = (f"Your fellow Ducks: {', '.join(teammates)}.\n" if teammates
                          else "You are the only Duck.\n")
    else:
        role_label = "GOOSE (Innocent)"
        objective = "Complete your tasks and vote out every Duck."
        strategy = read_prompt_template("goose_strategy.txt")
        teammates_line = ""
    return fill_template(read_prompt_template("system.txt"), {
        "player_name": player,
        "role_label": role_label,
        "objective": objective,
        "total_geese": config.n_agents - config.n_ducks,
        "total_ducks": config.n_ducks,
        "all_players": ", ".join(config.names()),
        "teammates_line": teammates_line,
        "vision": VISION,
        "strategy": strategy.strip(),
    })


def _png_data_url(svg: str) -> str:
    """Rasterize one view for the request; vision endpoints take PNG/JPEG/WEBP/GIF only."""
    import cairosvg
    png = cairosvg.svg2png(bytestring=svg.encode("utf-8"))
    return "data:image/png;base64," + base64.b64encode(png).decode("ascii")


# =============================================================================
# TRANSPORT
# =============================================================================

def _create_client(endpoint: ModelEndpoint):
    """OpenAI-compatible client for one endpoint. Tests patch this."""
    api_key = get_model_api_key(endpoint.api_key_env)
    if not api_key:
        raise ModelTransportError(f"Environment variable {endpoint.api_key_env} is not set")
    from openai import OpenAI
    return OpenAI(api_key=api_key, base_url=endpoint.base_url, timeout=endpoint.timeout)


def complete(endpoint: ModelEndpoint, messages: list[dict], client=None) -> str:
    """
    One chat completion.

    Raises:
        ModelTransportError: missing key, network/HTTP failure, empty reply
    """
    try:
        client = client or _create_client(endpoint)
        response = client.chat.completions.create(
            model=endpoint.model,
            messages=messages,
            temperature=endpoint.temperature,
            max_tokens=endpoint.max_tokens,
        )
        content = response.choices[0].message.content
    except ModelTransportError:
        raise
    except Exception as e:
        logger.error("Request to %s failed: %s", endpoint.model, e)
        raise ModelTransportError(f"{endpoint.model}: {e}") from e
    if content is None:
        raise ModelTransportError(f"{endpoint.model} returned an empty reply")
    return content


# =============================================================================
# POLICY
# =============================================================================

class ModelPolicy:
    """
    A Policy backed by a chat model. One instance per seat; calls are
    sequential. A reply that failed to parse is quoted back to the model on
    the next call so the retry is a correction, not a repeat.
    """

    def __init__(self, endpoint: ModelEndpoint, player: str, role: Role, game_map: Map,
                 config: GameConfig, teammates: Optional[list[str]] = None, client=None):
        self.endpoint = endpoint
        self.player = player
        self.role = role
        self.map = game_map
        self.config = config
        self.system_prompt = build_system_prompt(player, role, config, teammates or [])
        self.calls = 0
        self._client = client
        self._feedback: Optional[str] = None

    @property
    def uses_images(self) -> bool:
        return self.endpoint.supports_images

    def _ask(self, observation: Observation, memory: AgentMemory, instruction: str) -> str:
        text = "\n\n".join([
            render_text(observation.summary),
            memory_digest(memory, window=self.endpoint.memory_window, now=observation.summary.tick),
            instruction,
        ])
        if self._feedback:
            text += "\n\n" + self._feedback
            self._feedback = None
        content: object = text
        if self.endpoint.supports_images and observation.global_view is not None:
            content = [{"type": "text", "text": text}]
            for view in (observation.global_view, observation.local_view):
                if view is not None:
                    content.append({"type": "image_url", "image_url": {"url": _png_data_url(view.svg)}})
        messages = [
            {"role": "system", "content": self.system_prompt},
            {"role": "user", "content": content},
        ]
        if self._client is None:
            self._client = _create_client(self.endpoint)
        self.calls += 1
        logger.debug("%s asks %s (call %d)", self.player, self.endpoint.model, self.calls)
        return complete(self.endpoint, messages, client=self._client)

    def _parse(self, phase: Phase, reply: str, **kwargs):
        try:
            return parse_response(phase, reply, game_map=self.map, **kwargs)
        except ResponseParseError as e:
            self._feedback = f"Your previous reply {reply.strip()!r} was rejected: {e}. Follow the response format exactly."
            raise

    def act(self, observation: Observation, memory: AgentMemory, legal: list[Action]) -> Action:
        options = ", ".join(a.render() for a in legal)
        instruction = (f"Available actions: {options}.\n"
                       "Respond with EXACTLY one of them, optionally followed by ' | say(message)'.")
        return self._parse(Phase.FREE_ROAM, self._ask(observation, memory, instruction), legal=legal)

    def speak(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        meeting = observation.summary.meeting
        order = meeting.speaking_order if meeting is not None else []
        round_number = len(transcript) // len(order) + 1 if order else 1
        instruction = f"Discussion round {round_number}. It is your turn to speak, {self.player}."
        return self._parse(Phase.DISCUSSION, self._ask(observation, memory, instruction))

    def vote(self, observation: Observation, memory: AgentMemory, transcript: list[TranscriptLine]) -> str:
        meeting = observation.summary.meeting
        candidates = list(meeting.speaking_order) if meeting is not None else []
        instruction = (f"Voting. Respond with EXACTLY one name from: {', '.join(candidates)}; "
                       "or 'skip' to abstain.")
        return self._parse(Phase.VOTING, self._ask(observation, memory, instruction), candidates=candidates)
