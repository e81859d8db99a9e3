"""
tools/claims/claim_dsl.py - Structured Claim Channel

Parses inline annotations of the form

    @claim{type=location;subject=Alice;room=medbay;temporal=this round}

out of an utterance. The grammar is in docs/claim_dsl.md. Scripted agents
write these annotations, so this channel needs no model at all.

    extract_structured(utterance, context)  -> [Claim, ...]
    to_annotation(type=..., subject=..., ...) -> "@claim{...}"
    validate_claim_fields(raw, context)     -> Claim   (shared with the model channel)
"""

import logging
import re
from typing import Iterable, Literal, Optional

from pydantic import BaseModel, ValidationError

from schema.claims import CLAIM_FIELDS, CONTENT_FIELDS, Claim
from schema.map import Map
from tools.map.map_graph import normalize_room

logger = logging.getLogger("claim_dsl")

ANNOTATION_START = "@claim"
_ANNOTATION = re.compile(r"@claim\{([^{}]*)\}")
_KEY = re.compile(r"^[a-z_]+$")

KNOWN_KEYS = {"type", "subject", "accuser", "defender"} | set(CONTENT_FIELDS)


class ClaimSyntaxError(ValueError):
    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"at position {position}: {message}")


class ClaimSchemaError(ValueError):
    """A claim that parses but breaks its type's field rules, or names an unknown player/room."""


class ClaimContext(BaseModel):
    """Who said it, when, and the names that are valid in this game."""
    speaker: str
    meeting_tick: int
    utterance_seq: Optional[int] = None
    players: list[str]
    game_map: Map


# =============================================================================
# PARSING
# =============================================================================

def parse_annotations(utterance: str) -> list[tuple[int, dict[str, str]]]:
    """
    Raw key/value dicts of every annotation, with their positions.

    Raises:
        ClaimSyntaxError: an annotation that is not closed, has an empty or
        malformed pair, or repeats a key
    """
    found = []
    position = utterance.find(ANNOTATION_START)
    while position != -1:
        match = _ANNOTATION.match(utterance, position)
        if match is None:
            raise ClaimSyntaxError(position, "annotation must be @claim{key=value;...}")
        pairs: dict[str, str] = {}
        body_start = match.start(1)
        offset = 0
        for chunk in match.group(1).split(";"):
            chunk_position = body_start + offset
            offset += len(chunk) + 1
            if not chunk.strip():
                continue
            if "=" not in chunk:
                raise ClaimSyntaxError(chunk_position, f"expected key=value, got '{chunk.strip()}'")
            key, value = chunk.split("=", 1)
            key = key.strip().lower()
            if not _KEY.match(key):
                raise ClaimSyntaxError(chunk_position, f"invalid key '{key}'")
            if key in pairs:
                raise ClaimSyntaxError(chunk_position, f"duplicate key '{key}'")
            pairs[key] = value.strip()
        found.append((position, pairs))
        position = utterance.find(ANNOTATION_START, match.end())
    return found


def extract_structured(utterance: str, context: ClaimContext,
                       on_error: Literal["raise", "drop"] = "raise") -> list[Claim]:
    """
    Every annotation in the utterance as a validated Claim, exact duplicates
    removed, ids assigned as "<meeting_tick>-<utterance_seq>-<index>".

    Raises (on_error="raise"):
        ClaimSyntaxError: malformed annotation (with position)
        ClaimSchemaError: unknown type/player/room or wrong fields for the type
    """
    claims = []
    for position, pairs in parse_annotations(utterance):
        try:
            claims.append(claim_from_pairs(pairs, context))
        except ClaimSchemaError as e:
            if on_error == "raise":
                raise ClaimSchemaError(f"annotation at position {position}: {e}") from e
            logger.warning("Dropped annotation at %d from %s: %s", position, context.speaker, e)
    return finalize_claims(claims, context)


def claim_from_pairs(pairs: dict[str, str], context: ClaimContext) -> Claim:
    unknown = set(pairs) - KNOWN_KEYS
    if unknown:
        raise ClaimSchemaError(f"unknown keys {sorted(unknown)}")
    raw: dict = dict(pairs)
    if "route" in raw:
        raw["route"] = [part.strip() for part in raw["route"].split(",") if part.strip()]
    return validate_claim_fields(raw, context)


def finalize_claims(claims: Iterable[Claim], context: ClaimContext) -> list[Claim]:
    """De-duplicate within one utterance and number the survivors."""
    seen = set()
    unique = []
    for claim in claims:
        key = claim.content_key()
        if key in seen:
            continue
        seen.add(key)
        unique.append(claim)
    seq = context.utterance_seq if context.utterance_seq is not None else 0
    return [
        claim.model_copy(update={"claim_id": f"{context.meeting_tick}-{seq}-{index}"})
        for index, claim in enumerate(unique)
    ]


# =============================================================================
# VALIDATION (shared by both channels)
# =============================================================================

def _player(name, context: ClaimContext, field: str) -> str:
    if name is None or str(name).strip() == "":
        raise ClaimSchemaError(f"missing {field}")
    wanted = str(name).strip().lower()
    for player in context.players:
        if player.lower() == wanted:
            return player
    raise ClaimSchemaError(f"unknown player '{name}' in {field}")


def _room(name, context: ClaimContext) -> str:
    room = normalize_room(str(name), context.game_map) if name is not None else None
    if room is None:
        raise ClaimSchemaError(f"unknown room '{name}'")
    return room


def validate_claim_fields(raw: dict, context: ClaimContext) -> Claim:
    """
    Turn a loose dict (DSL pairs or a model JSON item) into a Claim.

    Accepts the accuser/defender spelling for accusations/defenses and turns
    a location with a route into a route claim (a one-room route is a
    location).
    """
    if not isinstance(raw, dict):
        raise ClaimSchemaError(f"claim must be an object, got {type(raw).__name__}")
    raw = {k: v for k, v in raw.items() if v is not None and v != ""}
    claim_type = str(raw.pop("type", "")).strip().lower()

    if claim_type == "location" and "route" in raw:
        if "room" in raw:
            raise ClaimSchemaError("location claim has both room and route")
        route = raw["route"]
        if isinstance(route, str):
            route = [part.strip() for part in route.split(",") if part.strip()]
        if not isinstance(route, list):
            raise ClaimSchemaError("route must be a list of rooms")
        if len(route) == 1:
            raw["room"] = route[0]
            raw.pop("route")
        else:
            raw["route"] = route
            claim_type = "route"
    if claim_type not in CLAIM_FIELDS:
        raise ClaimSchemaError(f"unknown claim type '{claim_type}'")

    if claim_type == "accusation":
        subject = raw.pop("accuser", raw.pop("subject", None))
    elif claim_type == "defense":
        subject = raw.pop("defender", raw.pop("subject", None))
    else:
        subject = raw.pop("subject", None)
    subject = _player(subject, context, "subject")

    required, optional = CLAIM_FIELDS[claim_type]
    missing = [f for f in required if f not in raw]
    if missing:
        raise ClaimSchemaError(f"{claim_type} claim is missing {missing}")
    extra = set(raw) - set(required) - set(optional)
    if extra:
        raise ClaimSchemaError(f"{claim_type} claim does not take {sorted(extra)}")

    fields: dict = {}
    for key, value in raw.items():
        if key in ("target", "defended"):
            fields[key] = _player(value, context, key)
        elif key == "room":
            fields[key] = _room(value, context)
        elif key == "route":
            if isinstance(value, str):
                value = [part.strip() for part in value.split(",") if part.strip()]
            if not isinstance(value, list):
                raise ClaimSchemaError("route must be a list of rooms")
            rooms = [_room(r, context) for r in value]
            if len(rooms) < 2:
                raise ClaimSchemaError("route needs at least two rooms")
            fields[key] = rooms
        elif key in ("activity", "confidence"):
            fields[key] = str(value).strip().lower()
        else:
            fields[key] = str(value).strip()

    try:
        return Claim(
            speaker=context.speaker,
            meeting_tick=context.meeting_tick,
            utterance_seq=context.utterance_seq,
            type=claim_type,
            subject=subject,
            **fields,
        )
    except ValidationError as e:
        raise ClaimSchemaError(str(e)) from e


# =============================================================================
# WRITING
# =============================================================================

def to_annotation(**fields) -> str:
    """
    Render one annotation. Keys keep the given order; routes are joined
    with commas.

    >>> to_annotation(type="location", subject="Alice", room="medbay", temporal="this round")
    '@claim{type=location;subject=Alice;room=medbay;temporal=this round}'
    """
    parts = []
    for key, value in fields.items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(value)
        text = str(value)
        if any(ch in text for ch in ";{}"):
            raise ClaimSyntaxError(0, f"value for {key} may not contain ';', '{{' or '}}'")
        parts.append(f"{key}={text}")
    return "@claim{" + ";".join(parts) + "}"
