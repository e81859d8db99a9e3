"""
tools/metrics/aggregate.py - Setting-Level Summaries

Per-game reports -> one row per group, as a rich table or TSV.

Groupings:
    setting      one row per setting label
    model-role   one row per seat binding; a game feeds its Goose-side
                 metrics to the binding that played the Geese, its
                 Duck-side metrics to the binding that played the Ducks,
                 and the shared metrics to both

Means skip games where a metric is None; every cell carries the number of
games it was computed from.
"""

import csv
import io
import logging
from typing import Literal, Optional

from rich import box
from rich.console import Console
from rich.table import Table

from schema.metrics import GameReport, MetricSummary, SummaryRow
from tools.metrics.tiers import IncompleteInputError, mean

logger = logging.getLogger("metrics")

Grouping = Literal["setting", "model-role"]

TIER1_METRICS = (
    "duration_ticks", "task_completion_rate", "total_kills", "first_kill_tick", "meetings_body_report",
    "meetings_emergency", "ejections", "ejection_accuracy", "survivors", "surviving_geese", "surviving_ducks",
)
TIER2_METRICS = (
    "goose_vote_accuracy", "goose_skip_rate", "report_latency", "task_efficiency", "spatial_coverage_geese",
    "spatial_coverage_ducks", "kill_rate", "cooldown_utilization", "self_report_rate", "post_kill_displacement",
)
TIER3_METRICS = (
    "goose_truthfulness", "duck_truthfulness", "spatial_hallucination_rate", "deception_rate",
    "deception_sophistication", "accusation_accuracy", "unsupported_accusation_rate", "lie_detection_rate",
    "total_claims",
)
ALL_METRICS = TIER1_METRICS + TIER2_METRICS + TIER3_METRICS

GOOSE_SIDE = {
    "goose_vote_accuracy", "goose_skip_rate", "report_latency", "task_efficiency", "spatial_coverage_geese",
    "goose_truthfulness", "spatial_hallucination_rate", "accusation_accuracy", "unsupported_accusation_rate",
}
DUCK_SIDE = {
    "kill_rate", "cooldown_utilization", "self_report_rate", "post_kill_displacement", "spatial_coverage_ducks",
    "duck_truthfulness", "deception_rate", "deception_sophistication",
}

# the compact column set of the printed table
TABLE_COLUMNS = (
    "task_completion_rate", "ejection_accuracy", "duration_ticks", "goose_vote_accuracy", "goose_skip_rate",
    "task_efficiency", "kill_rate", "cooldown_utilization", "goose_truthfulness", "duck_truthfulness",
    "spatial_hallucination_rate", "deception_rate", "deception_sophistication", "accusation_accuracy",
    "unsupported_accusation_rate", "lie_detection_rate",
)


def flatten(report: GameReport) -> dict[str, Optional[float]]:
    values: dict[str, Optional[float]] = {}
    values.update({k: getattr(report.tier1, k) for k in TIER1_METRICS})
    values.update({k: getattr(report.tier2, k) for k in TIER2_METRICS})
    if report.tier3 is not None:
        values.update({k: getattr(report.tier3, k) for k in TIER3_METRICS})
    return values


def _side_of(metric: str) -> str:
    if metric in GOOSE_SIDE:
        return "geese"
    if metric in DUCK_SIDE:
        return "ducks"
    return "shared"


class _Group:
    def __init__(self, key: str):
        self.key = key
        self.games = 0
        self.goose_wins = 0
        self.tier3_games = 0
        self.values: dict[str, list[float]] = {m: [] for m in ALL_METRICS}

    def add(self, report: GameReport, sides: set[str]) -> None:
        self.games += 1
        self.goose_wins += report.tier1.winner == "geese"
        self.tier3_games += report.tier3 is not None
        for metric, value in flatten(report).items():
            if value is not None and _side_of(metric) in sides:
                self.values[metric].append(float(value))

    def row(self) -> SummaryRow:
        return SummaryRow(
            key=self.key,
            games=self.games,
            goose_win_rate=self.goose_wins / self.games,
            tier3_games=self.tier3_games,
            metrics={m: MetricSummary(mean=mean(v), count=len(v)) for m, v in self.values.items()},
        )


def aggregate(reports: list[GameReport], grouping: Grouping = "setting") -> list[SummaryRow]:
    """
    Raises:
        IncompleteInputError: no reports
        ValueError: unknown grouping
    """
    if not reports:
        raise IncompleteInputError("nothing to aggregate: no game reports")
    if grouping not in ("setting", "model-role"):
        raise ValueError(f"unknown grouping '{grouping}'")

    groups: dict[str, _Group] = {}

    def group(key: str) -> _Group:
        if key not in groups:
            groups[key] = _Group(key)
        return groups[key]

    for report in reports:
        if grouping == "setting":
            group(report.setting).add(report, {"geese", "ducks", "shared"})
        elif report.goose_binding == report.duck_binding:
            group(report.goose_binding).add(report, {"geese", "ducks", "shared"})
        else:
            group(report.goose_binding).add(report, {"geese", "shared"})
            group(report.duck_binding).add(report, {"ducks", "shared"})

    rows = [groups[key].row() for key in sorted(groups)]
    logger.info("Aggregated %d games into %d rows (%s)", len(reports), len(rows), grouping)
    return rows


# =============================================================================
# OUTPUT
# =============================================================================

def format_cell(summary: MetricSummary, games: int, available: bool = True) -> str:
    if not available:
        return "unavailable"
    if summary.mean is None:
        return "n/a"
    text = f"{summary.mean:.3f}"
    if summary.count != games:
        text += f" ({summary.count}/{games})"
    return text


def _cells(row: SummaryRow, columns) -> list[str]:
    cells = [row.key, str(row.games), "n/a" if row.goose_win_rate is None else f"{row.goose_win_rate:.3f}"]
    for metric in columns:
        available = metric not in TIER3_METRICS or row.tier3_games > 0
        cells.append(format_cell(row.metrics[metric], row.games, available))
    return cells


def render_table(rows: list[SummaryRow], title: str = "Goose Duck Arena summary") -> str:
    table = Table(title=title, box=box.ROUNDED)
    table.add_column("group", style="cyan")
    table.add_column("games", justify="right")
    table.add_column("goose_win_rate", justify="right")
    for metric in TABLE_COLUMNS:
        table.add_column(metric, justify="right", overflow="fold")
    for row in rows:
        table.add_row(*_cells(row, TABLE_COLUMNS))

    console = Console(record=True, width=max(120, 14 * (len(TABLE_COLUMNS) + 3)), file=io.StringIO())
    console.print(table)
    return console.export_text()


def render_tsv(rows: list[SummaryRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
    writer.writerow(["group", "games", "goose_win_rate"] + list(ALL_METRICS))
    for row in rows:
        writer.writerow(_cells(row, ALL_METRICS))
    return buffer.getvalue()
