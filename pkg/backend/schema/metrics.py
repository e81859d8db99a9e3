"""
schema/metrics.py - Metric Report Shapes

Per-game reports in three tiers plus the aggregated summary rows.

Rates are in [0, 1] or None; None means the denominator was 0 and is
reported distinctly from 0.
"""

from typing import Optional

from pydantic import BaseModel, Field


class Tier1Report(BaseModel):
    """Outcome-level numbers."""
    winner: str
    win_reason: str
    duration_ticks: int
    task_completion_rate: Optional[float] = None
    total_kills: int = 0
    first_kill_tick: Optional[int] = None
    meetings_body_report: int = 0
    meetings_emergency: int = 0
    ejections: int = 0
    ejection_accuracy: Optional[float] = None
    survivors: int = 0
    surviving_geese: int = 0
    surviving_ducks: int = 0


class Tier2Report(BaseModel):
    """Strategic behaviour."""
    goose_vote_accuracy: Optional[float] = None
    goose_skip_rate: Optional[float] = None
    report_latency: Optional[float] = None
    task_efficiency: Optional[float] = None
    spatial_coverage_geese: Optional[float] = None
    spatial_coverage_ducks: Optional[float] = None
    kill_rate: Optional[float] = None
    cooldown_utilization: Optional[float] = None
    self_report_rate: Optional[float] = None
    post_kill_displacement: Optional[float] = None


class VerdictBreakdown(BaseModel):
    """Fractions of one team's verifiable spatial claims; they sum to 1 when verifiable > 0."""
    verifiable: int = 0
    true: Optional[float] = None
    false: Optional[float] = None
    wrong_room: Optional[float] = None
    near_miss: Optional[float] = None


class Tier3Report(BaseModel):
    """Honesty and deception, from verified claims."""
    goose_truthfulness: Optional[float] = None
    duck_truthfulness: Optional[float] = None
    spatial_hallucination_rate: Optional[float] = None
    deception_rate: Optional[float] = None
    deception_sophistication: Optional[float] = None
    accusation_accuracy: Optional[float] = None
    unsupported_accusation_rate: Optional[float] = None
    lie_detection_rate: Optional[float] = None
    lie_meetings: int = 0
    lie_meetings_with_duck_ejection: int = 0
    claim_distribution: dict[str, int] = Field(default_factory=dict)
    total_claims: int = 0
    goose_breakdown: VerdictBreakdown = Field(default_factory=VerdictBreakdown)
    duck_breakdown: VerdictBreakdown = Field(default_factory=VerdictBreakdown)


class GameReport(BaseModel):
    seed: int
    setting: str = "default"
    goose_binding: str = ""
    duck_binding: str = ""
    tier1: Tier1Report
    tier2: Tier2Report
    tier3: Optional[Tier3Report] = None     # None when the game has no verdict sidecar


class MetricSummary(BaseModel):
    mean: Optional[float] = None
    count: int = 0          # games where the metric was defined


class SummaryRow(BaseModel):
    key: str
    games: int
    goose_win_rate: Optional[float] = None
    tier3_games: int = 0
    metrics: dict[str, MetricSummary] = Field(default_factory=dict)
