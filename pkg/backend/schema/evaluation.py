"""
schema/evaluation.py - Evaluation Settings

The tunable constants of temporal resolution, verification and metrics.
Every field has the documented default; unknown keys are rejected.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class EvaluationSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    recent_window_ticks: int = Field(3, ge=1)        # "just now", "right before the report"
    start_window_ticks: int = Field(3, ge=1)         # "at the start"
    explicit_tick_tolerance: int = Field(1, ge=0)    # "at tick T" -> [T - tol, T + tol]
    near_miss_threshold: float = Field(0.8, gt=0.0, le=1.0)
    witnessed_satisfies_sighting: bool = True
    routes_count_as_spatial: bool = True             # routes in the hallucination rate
    include_defenses: bool = False                   # defenses in the unsupported-claim rate
    cooldown_counting: Literal["interval", "tick"] = "interval"
