"""
schema/claims.py - Claim and Verdict Data Shapes

Claims are individually checkable assertions pulled out of meeting
utterances. Verdicts are what the verifier says about them.

Field requirements per claim type live in CLAIM_FIELDS; validation against
them happens in tools/claims (this file stays shape-only).
"""

from typing import Literal, Optional

from pydantic import BaseModel, Field

ClaimType = Literal["location", "route", "sighting", "activity", "accusation", "defense"]
ActivityKind = Literal["task", "traveling", "waiting"]
Confidence = Literal["strong", "moderate", "weak"]
VerdictResult = Literal["true", "false", "wrong_room", "near_miss", "unverifiable"]

SPATIAL_TYPES = ("location", "route", "sighting", "activity")
VERIFIABLE_RESULTS = ("true", "false", "wrong_room", "near_miss")

# type -> (required fields, optional fields); subject is always required
CLAIM_FIELDS: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "location": (("room", "temporal"), ()),
    "route": (("route", "temporal"), ()),
    "sighting": (("target", "room", "temporal"), ()),
    "activity": (("activity", "room", "temporal"), ()),
    "accusation": (("target",), ("confidence", "temporal")),
    "defense": (("defended",), ("basis", "temporal")),
}
CONTENT_FIELDS = ("target", "defended", "room", "route", "activity", "confidence", "temporal", "basis")


class Claim(BaseModel):
    """
    subject is the player the claim is about; for accusations it is the
    accuser and for defenses the defender.
    """
    claim_id: str = ""
    speaker: str
    meeting_tick: int
    utterance_seq: Optional[int] = None
    type: ClaimType
    subject: str
    target: Optional[str] = None
    defended: Optional[str] = None
    room: Optional[str] = None
    route: Optional[list[str]] = None
    activity: Optional[ActivityKind] = None
    confidence: Optional[Confidence] = None
    temporal: Optional[str] = None
    basis: Optional[str] = None

    def content_key(self) -> tuple:
        """Everything except identifiers; equal keys are exact duplicates."""
        return (self.type, self.subject) + tuple(
            tuple(v) if isinstance(v, list) else v for v in (getattr(self, f) for f in CONTENT_FIELDS)
        )


class TickWindow(BaseModel):
    start_tick: int
    end_tick: int
    rule: str
    duration: bool = False

    def ticks(self) -> range:
        return range(self.start_tick, self.end_tick + 1)


class Unresolvable(BaseModel):
    reason: str


class GroundingRecord(BaseModel):
    accuser: str
    target: str
    co_location_ticks: list[int] = Field(default_factory=list)
    witnessed_ticks: list[int] = Field(default_factory=list)
    supporting_claims: list[str] = Field(default_factory=list)

    def grounded(self) -> bool:
        return bool(self.co_location_ticks or self.witnessed_ticks or self.supporting_claims)


class Verdict(BaseModel):
    claim_id: str
    speaker: str
    meeting_tick: int
    type: ClaimType
    result: VerdictResult
    evidence: list[str] = Field(default_factory=list)
    window: Optional[TickWindow] = None
    note: Optional[str] = None
    outcome_correct: Optional[bool] = None       # accusations only
    grounded: Optional[bool] = None              # accusations and defenses
    grounding: Optional[GroundingRecord] = None
