import pytest

from schema.claims import Claim, Verdict
from schema.evaluation import EvaluationSettings
from schema.game import GameConfig
from schema.metrics import GameReport, MetricSummary, Tier1Report, Tier2Report, Tier3Report
from tools.metrics.aggregate import ALL_METRICS, aggregate, format_cell, render_table, render_tsv
from tools.metrics.tiers import (
    IncompleteInputError,
    build_report,
    kill_opportunities,
    tier1,
    tier2,
    tier3,
)

GEESE = ("Alice", "Bob", "Charlie", "Diana")


@pytest.fixture
def crafted_log(two_room_map, log_builder):
    """
    Eve (Duck) kills Charlie in medbay at tick 1. Alice reports at tick 2 and
    the table ejects Diana (a Goose); Alice calls a meeting at tick 3 and Eve
    is ejected.
    """
    config = GameConfig(n_agents=5, n_ducks=1, tasks_per_goose=1, task_duration=1, kill_cooldown=1)
    seats = {p: "baseline" for p in GEESE} | {"Eve": "gpt"}
    b = log_builder(two_room_map, config, seats=seats)
    b.emit("GameStart", players=list(GEESE) + ["Eve"],
           spawn={"Alice": "cafeteria", "Bob": "cafeteria", "Charlie": "medbay", "Diana": "cafeteria",
                  "Eve": "medbay"})
    for player in GEESE:
        b.emit("RoleAssigned", player=player, role="goose")
    b.emit("RoleAssigned", player="Eve", role="duck")
    for player, room in (("Alice", "medbay"), ("Bob", "medbay"), ("Charlie", "medbay"), ("Diana", "cafeteria")):
        b.emit("TaskAssigned", player=player, task_id=0, room=room, fake=False)
    b.emit("TaskAssigned", player="Eve", task_id=0, room="medbay", fake=True)

    b.emit("CooldownTick", player="Eve", remaining=0)
    b.emit("TaskProgressed", player="Charlie", task_id=0, room="medbay", progress=1)
    b.emit("TaskCompleted", player="Charlie", task_id=0, room="medbay")
    b.emit("Waited", player="Eve", room="medbay")
    b.emit("MoveStarted", player="Alice", from_room="cafeteria", to_room="medbay", weight=2)
    b.emit("Waited", player="Bob", room="cafeteria")
    b.emit("TaskProgressed", player="Diana", task_id=0, room="cafeteria", progress=1)
    b.emit("TaskCompleted", player="Diana", task_id=0, room="cafeteria")

    b.at(1)
    b.emit("MoveProgressed", player="Alice", from_room="cafeteria", to_room="medbay", remaining=1)
    b.emit("Killed", actor="Eve", target="Charlie", room="medbay")
    b.emit("Waited", player="Bob", room="cafeteria")
    b.emit("Waited", player="Diana", room="cafeteria")

    b.at(2)
    b.emit("Arrived", player="Alice", from_room="cafeteria", to_room="medbay")
    b.emit("CooldownTick", player="Eve", remaining=0)
    b.emit("MoveStarted", player="Eve", from_room="medbay", to_room="cafeteria", weight=2)
    b.emit("BodyReported", reporter="Alice", victims=["Charlie"], room="medbay")
    b.emit("PhaseChanged", phase="discussion", cancelled={"Eve": "medbay"})
    b.emit("SpeakingOrderFixed", order=["Alice", "Bob", "Diana", "Eve"])
    b.emit("PhaseChanged", phase="voting")
    for voter, target in (("Alice", "Eve"), ("Bob", "Diana"), ("Diana", "skip"), ("Eve", "Diana")):
        b.emit("VoteCast", voter=voter, target=target)
    b.emit("PhaseChanged", phase="ejection")
    b.emit("Ejected", player="Diana", tally={"Diana": 2, "Eve": 1, "skip": 1})

    b.at(3)
    b.emit("Respawned", positions={"Alice": "cafeteria", "Bob": "medbay", "Eve": "cafeteria"})
    b.emit("PhaseChanged", phase="free_roam")
    b.emit("Waited", player="Eve", room="cafeteria")
    b.emit("MeetingCalled", caller="Alice", room="cafeteria")
    b.emit("PhaseChanged", phase="discussion", cancelled={})
    b.emit("SpeakingOrderFixed", order=["Alice", "Bob", "Eve"])
    b.emit("PhaseChanged", phase="voting")
    for voter, target in (("Alice", "Eve"), ("Bob", "Eve"), ("Eve", "Alice")):
        b.emit("VoteCast", voter=voter, target=target)
    b.emit("PhaseChanged", phase="ejection")
    b.emit("Ejected", player="Eve", tally={"Alice": 1, "Eve": 2})
    return b.over("geese", "all_ducks_ejected")


def verdict(claim_id, speaker, type, result, meeting_tick=2, **fields):
    return Verdict(claim_id=claim_id, speaker=speaker, meeting_tick=meeting_tick, type=type, result=result,
                   **fields)


@pytest.fixture
def crafted_verdicts():
    return [
        verdict("g1", "Alice", "location", "true"),
        verdict("g2", "Alice", "route", "false"),
        verdict("g3", "Bob", "sighting", "wrong_room"),
        verdict("g4", "Bob", "activity", "true"),
        verdict("g5", "Alice", "location", "near_miss"),
        verdict("g6", "Alice", "location", "unverifiable"),
        verdict("d1", "Eve", "location", "false"),
        verdict("d2", "Eve", "location", "near_miss"),
        verdict("d3", "Eve", "activity", "true"),
        verdict("d4", "Eve", "location", "false", meeting_tick=3),
        verdict("a1", "Alice", "accusation", "unverifiable", outcome_correct=True, grounded=True),
        verdict("a2", "Bob", "accusation", "unverifiable", outcome_correct=False, grounded=False),
        verdict("a3", "Eve", "accusation", "unverifiable", outcome_correct=False, grounded=True),
        verdict("f1", "Bob", "defense", "unverifiable", grounded=False),
    ]


# =============================================================================
# TIER 1 AND 2
# =============================================================================

def test_tier1_of_the_crafted_game(crafted_log):
    report = tier1(crafted_log)
    assert (report.winner, report.win_reason, report.duration_ticks) == ("geese", "all_ducks_ejected", 3)
    assert report.task_completion_rate == 0.5
    assert (report.total_kills, report.first_kill_tick) == (1, 1)
    assert (report.meetings_body_report, report.meetings_emergency) == (1, 1)
    assert (report.ejections, report.ejection_accuracy) == (2, 0.5)
    assert (report.survivors, report.surviving_geese, report.surviving_ducks) == (2, 2, 0)


def test_tier2_of_the_crafted_game(crafted_log):
    report = tier2(crafted_log)
    assert report.goose_vote_accuracy == 0.75
    assert report.goose_skip_rate == 0.2
    assert report.report_latency == 1.0
    assert report.task_efficiency == pytest.approx(2 / 9)
    assert report.spatial_coverage_geese == 1.5
    assert report.spatial_coverage_ducks == 2.0
    assert report.kill_rate == 1.0
    assert report.cooldown_utilization == 0.5
    assert report.self_report_rate == 0.0
    assert report.post_kill_displacement == 0.0


def test_cooldown_counting_modes(crafted_log):
    assert kill_opportunities(crafted_log, "interval") == (2, 1)
    assert kill_opportunities(crafted_log, "tick") == (4, 1)
    report = tier2(crafted_log, EvaluationSettings(cooldown_counting="tick"))
    assert report.cooldown_utilization == 0.25


def test_empty_denominators_are_none(chain_map, log_builder):
    config = GameConfig(n_agents=3, n_ducks=1, tasks_per_goose=0)
    b = log_builder(chain_map, config)
    b.emit("GameStart", players=["Alice", "Bob", "Charlie"], spawn={"Alice": "a", "Bob": "b", "Charlie": "c"})
    b.emit("RoleAssigned", player="Alice", role="goose")
    b.emit("RoleAssigned", player="Bob", role="duck")
    b.emit("RoleAssigned", player="Charlie", role="goose")
    log = b.over("geese", "timeout")

    first, second = tier1(log), tier2(log)
    assert first.task_completion_rate is None and first.ejection_accuracy is None
    assert first.first_kill_tick is None
    assert second.goose_vote_accuracy is None and second.report_latency is None
    assert second.self_report_rate is None and second.post_kill_displacement is None
    assert second.kill_rate == 0.0


def test_incomplete_logs_are_rejected(crafted_log):
    truncated = crafted_log.model_copy(update={"events": crafted_log.events[:-1]})
    for metric in (tier1, tier2):
        with pytest.raises(IncompleteInputError):
            metric(truncated)


# =============================================================================
# TIER 3
# =============================================================================

def test_tier3_of_the_crafted_game(crafted_log, crafted_verdicts):
    report = tier3(crafted_log, crafted_verdicts)
    assert report.goose_truthfulness == 0.4
    assert report.duck_truthfulness == 0.25
    assert report.spatial_hallucination_rate == 0.5
    assert report.deception_rate == 0.5
    assert report.deception_sophistication == pytest.approx(1 / 3)
    assert report.accusation_accuracy == pytest.approx(1 / 3)
    assert report.unsupported_accusation_rate == pytest.approx(1 / 3)
    assert (report.lie_meetings, report.lie_meetings_with_duck_ejection) == (2, 1)
    assert report.lie_detection_rate == 0.5
    assert report.claim_distribution == {"location": 6, "route": 1, "sighting": 1, "activity": 2,
                                         "accusation": 3, "defense": 1}
    assert report.total_claims == 14
    assert report.goose_breakdown.verifiable == 5
    assert (report.goose_breakdown.false, report.goose_breakdown.wrong_room) == (0.2, 0.2)
    assert report.duck_breakdown.near_miss == 0.25


def test_tier3_settings(crafted_log, crafted_verdicts):
    settings = EvaluationSettings(routes_count_as_spatial=False, include_defenses=True)
    report = tier3(crafted_log, crafted_verdicts, settings=settings)
    assert report.spatial_hallucination_rate == pytest.approx(1 / 3)
    assert report.unsupported_accusation_rate == 0.5


def test_tier3_without_claims(crafted_log):
    report = tier3(crafted_log, [])
    assert report.goose_truthfulness is None and report.deception_rate is None
    assert report.lie_detection_rate is None and report.lie_meetings == 0
    assert report.total_claims == 0


def test_claims_without_verdicts_are_rejected(crafted_log, crafted_verdicts):
    orphan = Claim(claim_id="x9", speaker="Bob", meeting_tick=2, type="location", subject="Bob",
                   room="medbay", temporal="tick 1")
    with pytest.raises(IncompleteInputError):
        tier3(crafted_log, crafted_verdicts, claims=[orphan])


def test_build_report(crafted_log, crafted_verdicts):
    report = build_report(crafted_log, crafted_verdicts)
    assert (report.setting, report.goose_binding, report.duck_binding) == ("crafted", "baseline", "gpt")
    assert report.tier3 is not None and report.tier3.total_claims == 14
    assert build_report(crafted_log).tier3 is None
    assert build_report(crafted_log, crafted_verdicts) == report


# =============================================================================
# AGGREGATION
# =============================================================================

def game_report(setting="default", goose="baseline", duck="baseline", winner="geese",
                tier2=None, tier3=None) -> GameReport:
    return GameReport(
        seed=0, setting=setting, goose_binding=goose, duck_binding=duck,
        tier1=Tier1Report(winner=winner, win_reason="timeout", duration_ticks=10),
        tier2=tier2 or Tier2Report(),
        tier3=tier3,
    )


def test_aggregate_by_setting():
    reports = [
        game_report("a", tier2=Tier2Report(goose_vote_accuracy=1.0)),
        game_report("a", winner="ducks", tier2=Tier2Report(goose_vote_accuracy=0.5)),
        game_report("b", tier3=Tier3Report(goose_truthfulness=0.8)),
    ]
    a, b = aggregate(reports, "setting")
    assert (a.key, a.games, a.goose_win_rate, a.tier3_games) == ("a", 2, 0.5, 0)
    assert a.metrics["goose_vote_accuracy"] == MetricSummary(mean=0.75, count=2)
    assert a.metrics["goose_truthfulness"] == MetricSummary(mean=None, count=0)
    assert (b.key, b.tier3_games) == ("b", 1)
    assert b.metrics["goose_truthfulness"].mean == 0.8


def test_aggregate_by_model_role_splits_the_sides():
    reports = [
        game_report(goose="baseline", duck="gpt", tier2=Tier2Report(goose_vote_accuracy=1.0, kill_rate=2.0)),
        game_report(goose="gpt", duck="gpt", tier2=Tier2Report(goose_vote_accuracy=0.0, kill_rate=1.0)),
    ]
    baseline, gpt = aggregate(reports, "model-role")
    assert (baseline.key, baseline.games) == ("baseline", 1)
    assert baseline.metrics["goose_vote_accuracy"].mean == 1.0
    assert baseline.metrics["kill_rate"].count == 0
    assert baseline.metrics["duration_ticks"].mean == 10

    assert (gpt.key, gpt.games) == ("gpt", 2)
    assert gpt.metrics["kill_rate"] == MetricSummary(mean=1.5, count=2)
    assert gpt.metrics["goose_vote_accuracy"] == MetricSummary(mean=0.0, count=1)


def test_aggregate_errors():
    with pytest.raises(IncompleteInputError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([game_report()], "by-weather")


def test_format_cell():
    assert format_cell(MetricSummary(mean=1.0, count=1), 2) == "1.000 (1/2)"
    assert format_cell(MetricSummary(mean=0.25, count=2), 2) == "0.250"
    assert format_cell(MetricSummary(), 2) == "n/a"
    assert format_cell(MetricSummary(mean=0.5, count=2), 2, available=False) == "unavailable"


def test_rendering():
    rows = aggregate([game_report(), game_report(winner="ducks")])
    assert "default" in render_table(rows)

    header, line = render_tsv(rows).splitlines()
    assert header.split("\t") == ["group", "games", "goose_win_rate"] + list(ALL_METRICS)
    cells = dict(zip(header.split("\t"), line.split("\t")))
    assert (cells["group"], cells["games"], cells["goose_win_rate"]) == ("default", "2", "0.500")
    assert cells["goose_truthfulness"] == "unavailable"
    assert cells["goose_vote_accuracy"] == "n/a"
    assert cells["duration_ticks"] == "10.000"
