"""
tools/claims/claim_extractor.py - Claim Extraction (both channels)

═══════════════════════════════════════════════════════════════════════════════
RESPONSIBILITY
═══════════════════════════════════════════════════════════════════════════════

Input:  an utterance + who said it in which meeting
Output: [Claim, ...]

Two channels, same output shape:

    structured   @claim{...} annotations (tools/claims/claim_dsl.py)
    model        a chat model fills assets/prompts/claim_extraction.txt and
                 answers with a JSON array

Model replies are cached by (speaker, meeting tick, message, prompt
version), so re-extracting a game makes zero remote calls and yields the
same claims.

✅ Invalid items in a model reply are dropped one by one (WARNING logged)
❌ A reply that is not a JSON array is an error for the whole utterance
"""

import hashlib
import json
import logging
import re
from typing import Literal, Optional

from auto.auto import read_prompt_template
from crud.game_files import ExtractionCache
from schema.claims import Claim
from schema.events import GameLog
from schema.game import MeetingRecord
from schema.run_spec import ModelEndpoint
from tools.agent.agent_process import ModelTransportError, complete, fill_template
from tools.claims.claim_dsl import (
    ClaimContext,
    ClaimSchemaError,
    ClaimSyntaxError,
    extract_structured,
    finalize_claims,
    validate_claim_fields,
)
from tools.eventlog.replay import meetings_from_log

logger = logging.getLogger("claim_extractor")

PROMPT_NAME = "claim_extraction.txt"
PROMPT_VERSION = "1"
_FENCE = re.compile(r"^```(?:json)?\s*|\s*```$")

Channel = Literal["structured", "model"]


class ExtractionTransportError(RuntimeError):
    """The model channel could not get a usable reply."""


def cache_key(speaker: str, meeting_tick: int, message: str, prompt_version: str = PROMPT_VERSION) -> str:
    blob = json.dumps([speaker, meeting_tick, message, prompt_version], ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def build_extraction_prompt(message: str, context: ClaimContext) -> str:
    rooms = list(context.game_map.rooms)
    return fill_template(read_prompt_template(PROMPT_NAME), {
        "room_count": len(rooms),
        "room_list": ", ".join(rooms),
        "speaker_name": context.speaker,
        "meeting_tick": context.meeting_tick,
        "player_names": ", ".join(context.players),
        "message": message,
    })


def parse_model_reply(reply: str) -> list:
    """
    Raises:
        ExtractionTransportError: the reply is not a JSON array
    """
    text = _FENCE.sub("", reply.strip()).strip()
    try:
        items = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("["), text.rfind("]")
        if start == -1 or end <= start:
            raise ExtractionTransportError(f"Reply is not a JSON array: {text[:80]!r}")
        try:
            items = json.loads(text[start:end + 1])
        except json.JSONDecodeError as e:
            raise ExtractionTransportError(f"Reply is not a JSON array: {e}") from e
    if not isinstance(items, list):
        raise ExtractionTransportError(f"Reply is a JSON {type(items).__name__}, not an array")
    return items


def extract_model(message: str, context: ClaimContext, endpoint: ModelEndpoint,
                  cache: Optional[ExtractionCache] = None, client=None) -> list[Claim]:
    """
    Claims of one utterance through the model channel.

    Raises:
        ExtractionTransportError: endpoint unreachable or reply not an array
    """
    key = cache_key(context.speaker, context.meeting_tick, message)
    items = cache.get(key) if cache is not None else None
    if items is None:
        messages = [{"role": "user", "content": build_extraction_prompt(message, context)}]
        try:
            reply = complete(endpoint, messages, client=client)
        except ModelTransportError as e:
            raise ExtractionTransportError(str(e)) from e
        items = parse_model_reply(reply)
        if cache is not None:
            cache.put(key, items)

    claims = []
    for index, item in enumerate(items):
        try:
            claims.append(validate_claim_fields(item, context))
        except ClaimSchemaError as e:
            logger.warning("Dropped item %d from %s at tick %d: %s", index, context.speaker, context.meeting_tick, e)
    return finalize_claims(claims, context)


# =============================================================================
# WHOLE GAME
# =============================================================================

def extract_game(log: GameLog, game_map, channel: Channel = "structured",
                 endpoint: Optional[ModelEndpoint] = None, cache: Optional[ExtractionCache] = None,
                 meetings: Optional[list[MeetingRecord]] = None, client=None) -> list[Claim]:
    """
    Every claim of every meeting utterance, in log order.

    Structured-channel annotations that do not validate are dropped with a
    WARNING, like invalid model items.
    """
    if channel == "model" and endpoint is None:
        raise ValueError("The model channel needs an endpoint")
    meetings = meetings if meetings is not None else meetings_from_log(log)
    players = list(log.header.config.names())
    claims: list[Claim] = []
    for meeting in meetings:
        for line in meeting.transcript:
            if not line.text.strip():
                continue
            context = ClaimContext(speaker=line.speaker, meeting_tick=meeting.meeting_tick,
                                   utterance_seq=line.seq, players=players, game_map=game_map)
            if channel == "structured":
                try:
                    claims += extract_structured(line.text, context, on_error="drop")
                except ClaimSyntaxError as e:
                    logger.warning("Skipped utterance %s of %s: %s", line.seq, line.speaker, e)
            else:
                claims += extract_model(line.text, context, endpoint, cache=cache, client=client)
    logger.info("Extracted %d claims from %d meetings (%s channel)", len(claims), len(meetings), channel)
    return claims
