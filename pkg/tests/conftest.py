import os
import sys

import pytest

# Add backend to path - tests run from the project root or from tests/
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "backend"))

from schema.events import Event, EventKind, GameLog, GameLogHeader  # noqa: E402
from schema.game import GameConfig  # noqa: E402
from schema.run_spec import RunSpec  # noqa: E402
from tools.business_logic.evaluation_flow import make_seat  # noqa: E402
from tools.engine.game_engine import run_game  # noqa: E402
from tools.eventlog.replay import Replayer, state_digest  # noqa: E402
from tools.map.map_graph import default_map, load_map, map_digest  # noqa: E402

TWO_ROOMS = {
    "name": "two-rooms",
    "rooms": ["cafeteria", "medbay"],
    "corridors": [{"a": "cafeteria", "b": "medbay", "weight": 2}],
}

CHAIN = {
    "name": "chain",
    "rooms": ["a", "b", "c"],
    "corridors": [{"a": "a", "b": "b", "weight": 1}, {"a": "b", "b": "c", "weight": 1}],
    "emergency_room": "b",
}


@pytest.fixture(scope="session")
def ship_map():
    return default_map()


@pytest.fixture(scope="session")
def two_room_map():
    return load_map(TWO_ROOMS)


@pytest.fixture(scope="session")
def chain_map():
    return load_map(CHAIN)


def play_baseline(game_map, seed: int, config: GameConfig = None, **kwargs) -> GameLog:
    """One game with every seat bound to the scripted baseline."""
    config = (config or GameConfig()).model_copy(update={"seed": seed})
    spec = RunSpec(config=config)
    players = config.names()

    def factory(player, role, session):
        return make_seat(spec, "baseline", player, role, players.index(player), session)

    return run_game(game_map, config, factory, seat_labels={p: "baseline" for p in players}, **kwargs)


@pytest.fixture(scope="session")
def play():
    return play_baseline


@pytest.fixture(scope="session")
def baseline_logs(ship_map):
    """50 scripted games on the default map, seeds 0..49."""
    return [play_baseline(ship_map, seed) for seed in range(50)]


class LogBuilder:
    """
    Hand-written logs for metric and verifier checks. Every event is folded
    through the real reducer, so an inconsistent fixture fails loudly.
    """

    def __init__(self, game_map, config: GameConfig, seats=None, setting: str = "crafted"):
        header = GameLogHeader(map_id=game_map.name, map_hash=map_digest(game_map), seed=config.seed,
                               config=config, setting=setting, seats=seats or {})
        self.log = GameLog(header=header)
        self.replayer = Replayer(config)
        self.tick = 0

    @property
    def state(self):
        return self.replayer.state

    def at(self, tick: int) -> "LogBuilder":
        self.tick = tick
        return self

    def emit(self, kind: str, **payload) -> Event:
        event = Event(seq=len(self.log.events), tick=self.tick, kind=EventKind(kind), payload=payload)
        self.replayer.apply(event)
        self.log.events.append(event)
        return event

    def over(self, winner: str, reason: str) -> GameLog:
        self.emit("GameOver", winner=winner, reason=reason, state_digest=state_digest(self.state))
        return self.log


@pytest.fixture
def log_builder():
    return LogBuilder
