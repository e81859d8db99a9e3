"""
tools/claims/temporal.py - Temporal Reference Resolution

Maps the free-text time reference of a claim to an inclusive tick window
inside the free-roam segment that preceded the meeting. Segment = [s, t]
with s the last respawn tick (0 before the first meeting) and t the
meeting's trigger tick.

Rule table (first match wins):

    "ticks A-B"                             [A - tol, B + tol]  clipped
    "tick T"                                [T - tol, T + tol]  clipped
    "the whole time"                        [s, t]              duration claim
    "just now", "right before the report",
    "when I found the body"                 [max(s, t - recent), max(s, t - 1)]
    "at the start"                          [s, s + start - 1]  clipped
    "this round", "since the last meeting"  [s, t]
    anything else                           Unresolvable

A clip that leaves nothing is Unresolvable too.
"""

import re
from typing import Union

from schema.claims import TickWindow, Unresolvable
from schema.evaluation import EvaluationSettings
from schema.game import MeetingRecord

_RANGE = re.compile(r"\bticks?\s+(\d+)\s*(?:-|–|to|through|and)\s*(?:tick\s+)?(\d+)\b")
_TICK = re.compile(r"\btick\s+(\d+)\b")

WHOLE_TIME = ("the whole time", "the entire time", "the whole round", "all round")
RECENT = ("just now", "right before the report", "right before the meeting", "when i found the body",
          "before the report")
START = ("at the start", "at the beginning", "start of the round", "beginning of the round")
SEGMENT = ("this round", "since the last meeting", "this time", "earlier this round")


def _clip(start: int, end: int, s: int, t: int, rule: str) -> Union[TickWindow, Unresolvable]:
    start, end = max(start, s), min(end, t)
    if start > end:
        return Unresolvable(reason=f"{rule} falls outside the segment [{s}, {t}]")
    return TickWindow(start_tick=start, end_tick=end, rule=rule)


def resolve_temporal(temporal: str, meeting: MeetingRecord,
                     settings: EvaluationSettings = EvaluationSettings()) -> Union[TickWindow, Unresolvable]:
    s, t = meeting.segment_start, meeting.meeting_tick
    text = " ".join(str(temporal or "").lower().split())
    if not text:
        return Unresolvable(reason="no temporal reference")
    tol = settings.explicit_tick_tolerance

    match = _RANGE.search(text)
    if match:
        a, b = sorted((int(match.group(1)), int(match.group(2))))
        return _clip(a - tol, b + tol, s, t, "tick_range")

    match = _TICK.search(text)
    if match:
        tick = int(match.group(1))
        return _clip(tick - tol, tick + tol, s, t, "explicit_tick")

    if any(phrase in text for phrase in WHOLE_TIME):
        return TickWindow(start_tick=s, end_tick=t, rule="whole_time", duration=True)

    if any(phrase in text for phrase in RECENT):
        return TickWindow(
            start_tick=max(s, t - settings.recent_window_ticks),
            end_tick=max(s, t - 1),
            rule="recent",
        )

    if any(phrase in text for phrase in START):
        return _clip(s, s + settings.start_window_ticks - 1, s, t, "start")

    if any(phrase in text for phrase in SEGMENT):
        return TickWindow(start_tick=s, end_tick=t, rule="segment")

    return Unresolvable(reason=f"no rule matches '{temporal}'")
