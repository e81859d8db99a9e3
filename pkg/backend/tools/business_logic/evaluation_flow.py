"""
tools/business_logic/evaluation_flow.py - Run / Verify / Report Orchestration

RESPONSIBILITY:
- Orchestrate every operator workflow from start to finish
- Commands know NOTHING about seats, extraction or metric formulas

STRICT RULES:
✅ Orchestration: build seats, run games, extract, verify, report
✅ Call crud/ for every file
✅ Log progress per game

❌ NO argument parsing (commands/)
❌ NO game rules (tools/engine), NO formulas (tools/metrics)

THE FLOWS:
    run_batch(spec, jobs)            one log per seed, optionally in parallel
    verify_log(log_path, extractor)  claims + verdicts sidecars
    report_dir(directory, grouping)  per-game reports + summary table
    replay_digests(log)              per-tick state digests, self-checked
    render_snapshot(log, tick, who)  two SVG views + summary text
"""

import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterator, Optional

from pydantic import BaseModel, ValidationError

from auto.auto import ConfigError, get_model_api_key, load_yaml_document
from crud.game_files import (
    ExtractionCache,
    cache_path,
    claims_path,
    list_logs,
    log_path_for_seed,
    read_jsonl,
    report_path,
    verdicts_path,
    write_jsonl,
    write_report,
)
from schema.claims import Claim, Verdict
from schema.evaluation import EvaluationSettings
from schema.events import EventKind, GameLog
from schema.game import GameState, Role
from schema.map import Map
from schema.metrics import GameReport
from schema.run_spec import MODEL_PREFIX, RunSpec
from tools.agent.agent_process import ModelPolicy
from tools.agent.policy import AgentSeat
from tools.agent.scripted import baseline_binding, make_scripted
from tools.claims.claim_extractor import extract_game
from tools.engine.game_engine import GameSession, run_game
from tools.eventlog.event_log import read_log
from tools.eventlog.replay import ReplayError, Replayer, pre_game_over_digest
from tools.map.map_graph import default_map, load_map, map_digest
from tools.metrics.aggregate import aggregate, render_table, render_tsv
from tools.metrics.tiers import build_report
from tools.observation.observation_builder import build_observation, render_text
from tools.verifier.verifier import verify_game

logger = logging.getLogger("evaluation_flow")


class GameResult(BaseModel):
    seed: int
    ok: bool
    log_path: str
    winner: Optional[str] = None
    reason: Optional[str] = None
    ticks: Optional[int] = None
    error: Optional[str] = None


class TickRangeError(ValueError):
    """The requested tick is not in the log."""


# =============================================================================
# RUN SPEC
# =============================================================================

def load_run_spec(path: str | Path) -> RunSpec:
    """
    Raises:
        ConfigError: unreadable file or invalid spec (names the field)
    """
    document = load_yaml_document(path) or {}
    try:
        spec = RunSpec.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid run spec {path}: {e}") from e
    if spec.map is not None and not Path(spec.map).is_absolute():
        relative = Path(path).parent / spec.map
        if relative.exists():
            spec.map = str(relative)
    return spec


def resolve_map(map_path: Optional[str | Path] = None) -> Map:
    return load_map(map_path) if map_path is not None else default_map()


def check_credentials(spec: RunSpec, tags: Optional[list[str]] = None) -> None:
    """
    Every model endpoint the run needs must find its secret in the environment.

    Raises:
        ConfigError: names the missing variable
    """
    if tags is None:
        tags = [b[len(MODEL_PREFIX):] for b in spec.bindings() if b.startswith(MODEL_PREFIX)]
    for tag in sorted(set(tags)):
        env_name = spec.models[tag].api_key_env
        if not get_model_api_key(env_name):
            raise ConfigError(f"Model '{tag}' needs the environment variable {env_name}, which is not set")


def seat_bindings(spec: RunSpec, players: list[str], roles: dict[str, Role]) -> dict[str, str]:
    """player -> binding as written in the spec (the label stored in the log header)."""
    if spec.seats is not None:
        return dict(zip(players, spec.seats))
    binding = spec.roles
    return {p: (binding.duck if roles[p] == Role.DUCK else binding.goose) if binding else "baseline"
            for p in players}


def make_seat(spec: RunSpec, binding: str, player: str, role: Role, seat_index: int,
              session: GameSession) -> AgentSeat:
    game_map, config = session.map, session.config
    if binding.startswith(MODEL_PREFIX):
        endpoint = spec.models[binding[len(MODEL_PREFIX):]]
        teammates = sorted(a.id for a in session.state.agents if a.role == Role.DUCK and a.id != player) \
            if role == Role.DUCK else []
        policy = ModelPolicy(endpoint, player, role, game_map, config, teammates=teammates)
        return AgentSeat(player, policy, game_map, config, with_views=endpoint.supports_images)
    name = baseline_binding(role, seat_index) if binding == "baseline" else binding
    return AgentSeat(player, make_scripted(name, player, role, game_map, config), game_map, config)


# =============================================================================
# RUN
# =============================================================================

def play_seed(spec: RunSpec, game_map: Map, seed: int, out_dir: str | Path) -> GameResult:
    """
    Play one seed and write <out>/<seed>.log. The log is streamed to a
    .partial file and only renamed once GameOver is written. When the game
    aborts the .partial file stays on disk, closed and holding every event
    up to the failure, and the result carries ok=False.
    """
    config = spec.config.model_copy(update={"seed": seed})
    path = log_path_for_seed(out_dir, seed)
    partial = path.with_suffix(".log.partial")
    players = config.names()
    labels: dict[str, str] = {}

    def factory(player: str, role: Role, session: GameSession) -> AgentSeat:
        if not labels:
            roles = {a.id: a.role for a in session.state.agents}
            labels.update(seat_bindings(spec, players, roles))
        return make_seat(spec, labels[player], player, role, players.index(player), session)

    text_only = not any(
        b.startswith(MODEL_PREFIX) and spec.models[b[len(MODEL_PREFIX):]].supports_images
        for b in spec.bindings()
    )
    try:
        log = run_game(game_map, config, factory, setting=spec.setting, seat_labels=labels,
                       text_only=text_only, log_path=partial)
    except Exception as e:
        logger.error("Seed %d aborted: %s", seed, e)
        return GameResult(seed=seed, ok=False, log_path=str(path), error=f"{type(e).__name__}: {e}")
    os.replace(partial, path)
    game_over = log.game_over()
    return GameResult(seed=seed, ok=True, log_path=str(path), winner=game_over.payload["winner"],
                      reason=game_over.payload["reason"], ticks=game_over.tick)


def run_batch(spec: RunSpec, jobs: int = 1, seeds: Optional[list[int]] = None) -> list[GameResult]:
    """
    Play every seed of the spec. Games run in a process pool when jobs > 1;
    results come back in seed-list order either way.

    Raises:
        ConfigError: missing credentials, bad map or unusable output dir
    """
    seeds = list(seeds if seeds is not None else spec.seeds)
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"duplicate seeds in {seeds}")
    check_credentials(spec)
    game_map = resolve_map(spec.map)
    out_dir = Path(spec.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory {out_dir}: {e}") from e

    logger.info("Running %d game(s) of setting '%s' into %s", len(seeds), spec.setting, out_dir)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(play_seed, spec, game_map, seed, out_dir) for seed in seeds]
            results = [future.result() for future in futures]
    else:
        results = [play_seed(spec, game_map, seed, out_dir) for seed in seeds]

    for done, result in enumerate(results, start=1):
        if result.ok:
            logger.info("[%d/%d] seed %d: %s by %s after %d ticks",
                        done, len(results), result.seed, result.winner, result.reason, result.ticks)
        else:
            logger.info("[%d/%d] seed %d: aborted (%s)", done, len(results), result.seed, result.error)
    return results


# =============================================================================
# VERIFY
# =============================================================================

def map_for_log(log: GameLog, map_path: Optional[str | Path] = None) -> Map:
    """
    Raises:
        ConfigError: the map's digest differs from the one in the log header
    """
    game_map = resolve_map(map_path)
    if map_digest(game_map) != log.header.map_hash:
        raise ConfigError(
            f"Log was played on map '{log.header.map_id}' ({log.header.map_hash[:12]}), "
            f"not on '{game_map.name}'; pass the right map"
        )
    return game_map


def verify_log(log_path: str | Path, extractor: str = "structured", spec: Optional[RunSpec] = None,
               map_path: Optional[str | Path] = None, client=None) -> tuple[list[Claim], list[Verdict]]:
    """
    Extract and verify every claim of one log; writes <seed>.claims and
    <seed>.verdicts next to it. The input log is only read.

    Raises:
        FileNotFoundError: no log
        ConfigError: model channel without an endpoint / credentials
        ExtractionTransportError: model channel failure
    """
    log = read_log(log_path)
    game_map = map_for_log(log, map_path if map_path is not None else (spec.map if spec else None))
    settings = spec.evaluation if spec is not None else EvaluationSettings()

    endpoint = cache = None
    if extractor == "model":
        if spec is None or spec.extraction_model is None:
            raise ConfigError("The model extractor needs a run spec with extraction_model set")
        check_credentials(spec, [spec.extraction_model])
        endpoint = spec.models[spec.extraction_model]
        cache = ExtractionCache(cache_path(log_path))

    claims = extract_game(log, game_map, channel=extractor, endpoint=endpoint, cache=cache, client=client)
    verdicts = verify_game(log, claims, settings)
    write_jsonl(claims_path(log_path), claims)
    write_jsonl(verdicts_path(log_path), verdicts)
    logger.info("%s: %d claims verified", Path(log_path).name, len(claims))
    return claims, verdicts


# =============================================================================
# REPORT
# =============================================================================

def report_game(log_path: str | Path, settings: EvaluationSettings = EvaluationSettings()) -> GameReport:
    log = read_log(log_path)
    verdicts = claims = None
    if verdicts_path(log_path).exists() and claims_path(log_path).exists():
        claims = read_jsonl(claims_path(log_path), Claim)
        verdicts = read_jsonl(verdicts_path(log_path), Verdict)
    else:
        logger.info("%s has no verdict sidecar; Tier-3 metrics unavailable", Path(log_path).name)
    report = build_report(log, verdicts, claims, settings)
    write_report(report_path(log_path), report)
    return report


def report_dir(directory: str | Path, grouping: str = "setting", fmt: str = "table",
               settings: EvaluationSettings = EvaluationSettings()) -> str:
    """
    Reports for every log under directory (recursively, so several settings
    can be pooled) and the summary written to <directory>/summary.<fmt>.

    Raises:
        FileNotFoundError: no such directory, or no logs in it
    """
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"No such directory: {root}")
    folders = sorted({p.parent for p in root.rglob("*.log")})
    logs = [path for folder in folders for path in list_logs(folder)]
    if not logs:
        raise FileNotFoundError(f"No .log files under {root}")

    reports = [report_game(path, settings) for path in logs]
    rows = aggregate(reports, grouping)
    text = render_table(rows) if fmt == "table" else render_tsv(rows)
    (root / f"summary.{fmt}").write_text(text, encoding="utf-8")
    return text


# =============================================================================
# REPLAY / RENDER
# =============================================================================

def replay_digests(log: GameLog, verbose: bool = False) -> Iterator[str]:
    """
    One line per tick: "tick <t> <sha256>" (or the full canonical state
    with verbose), then a self-check against GameOver.state_digest.

    Raises:
        ReplayError: corrupt log, or a final digest that does not match
    """
    replayer = Replayer(log.header.config, record_snapshots=True)
    for event in log.events:
        replayer.apply(event)
    replayer.finish()
    for tick in sorted(replayer.snapshots):
        snapshot = replayer.snapshots[tick]
        if verbose:
            yield f"tick {tick} {snapshot}"
        else:
            yield f"tick {tick} {hashlib.sha256(snapshot.encode('utf-8')).hexdigest()}"

    game_over = log.game_over()
    expected = game_over.payload["state_digest"]
    if pre_game_over_digest(log) != expected:
        raise ReplayError(game_over.seq, "replayed state does not match the GameOver digest")
    yield f"final digest {expected} ok"


def state_at(log: GameLog, tick: int) -> GameState:
    """
    The state at the end of tick (after every event stamped with it).

    Raises:
        TickRangeError: tick outside [0, final tick]
    """
    final_tick = log.events[-1].tick if log.events else 0
    if not (0 <= tick <= final_tick):
        raise TickRangeError(f"tick {tick} is outside 0..{final_tick}")
    replayer = Replayer(log.header.config)
    for event in log.events:
        if event.tick > tick:
            break
        if event.kind == EventKind.GAME_OVER:
            break
        replayer.apply(event)
    return replayer.state


def render_snapshot(log_path: str | Path, tick: int, viewer: str, out_dir: Optional[str | Path] = None,
                    map_path: Optional[str | Path] = None) -> list[Path]:
    """
    Write <viewer>_t<tick>_global.svg, _local.svg and _summary.txt.

    Raises:
        TickRangeError: tick not in the log
        DeadViewerError: viewer is dead at that tick
    """
    log = read_log(log_path)
    game_map = map_for_log(log, map_path)
    state = state_at(log, tick)
    if not state.has_player(viewer):
        raise ConfigError(f"No player named '{viewer}' (players: {', '.join(state.players)})")
    config = log.header.config
    observation = build_observation(state, viewer, game_map, task_duration=config.task_duration,
                                    meeting_budget=config.meeting_budget)
    target = Path(out_dir) if out_dir is not None else Path(log_path).parent
    target.mkdir(parents=True, exist_ok=True)
    stem = f"{viewer}_t{tick}"
    paths = [target / f"{stem}_global.svg", target / f"{stem}_local.svg", target / f"{stem}_summary.txt"]
    paths[0].write_text(observation.global_view.svg, encoding="utf-8")
    paths[1].write_text(observation.local_view.svg, encoding="utf-8")
    paths[2].write_text(render_text(observation.summary) + "\n", encoding="utf-8")
    return paths

