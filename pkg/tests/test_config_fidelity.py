import pytest
from pydantic import ValidationError

from auto.auto import ConfigError
from schema.evaluation import EvaluationSettings
from schema.game import GameConfig
from schema.run_spec import RunSpec
from tools.business_logic.evaluation_flow import load_run_spec
from tools.map.map_graph import adjacent


def test_default_game_config():
    config = GameConfig()
    assert config.n_agents == 6
    assert config.n_ducks == 1
    assert config.tasks_per_goose == 5
    assert config.kill_cooldown == 5
    assert config.names() == ["Alice", "Bob", "Charlie", "Diana", "Eve", "Frank"]


def test_default_map_shape(ship_map):
    assert len(ship_map.rooms) == 10
    assert len(ship_map.corridors) == 14
    assert {c.weight for c in ship_map.corridors} <= {1, 2, 3}
    assert ship_map.emergency_room == "cafeteria"
    assert set(ship_map.task_rooms) == set(ship_map.rooms)
    for room in ship_map.rooms:
        assert len(adjacent(ship_map, room)) >= 2


def test_extra_players_get_numbered_names():
    config = GameConfig(n_agents=8, n_ducks=2)
    assert config.names()[6:] == ["Player7", "Player8"]


@pytest.mark.parametrize("fields", [
    {"n_ducks": 6},
    {"n_ducks": 0},
    {"kill_cooldown": -1},
    {"task_duration": 0},
    {"seed": 2 ** 64},
    {"player_names": ["A", "B"]},
    {"n_agents": 2, "player_names": ["A", "A"]},
    {"n_agents": 2, "player_names": ["A", "Skip"]},
    {"unknown_field": 1},
])
def test_invalid_game_config_is_rejected(fields):
    with pytest.raises(ValidationError):
        GameConfig(**fields)


def test_evaluation_defaults():
    settings = EvaluationSettings()
    assert settings.recent_window_ticks == 3
    assert settings.start_window_ticks == 3
    assert settings.explicit_tick_tolerance == 1
    assert settings.near_miss_threshold == 0.8
    assert settings.witnessed_satisfies_sighting is True
    assert settings.routes_count_as_spatial is True
    assert settings.include_defenses is False
    assert settings.cooldown_counting == "interval"


def test_run_spec_bindings():
    spec = RunSpec(roles={"goose": "task_goose", "duck": "stalker_duck"})
    assert spec.bindings() == ["task_goose", "stalker_duck"]
    assert not spec.uses_models()

    spec = RunSpec(models={"gpt": {"model": "gpt-4o-mini"}}, roles={"goose": "model:gpt", "duck": "baseline"})
    assert spec.uses_models()
    assert spec.models["gpt"].api_key_env == "OPENAI_API_KEY"


@pytest.mark.parametrize("document", [
    {"seats": ["baseline"] * 5},
    {"seats": ["baseline"] * 6, "roles": {"goose": "baseline", "duck": "baseline"}},
    {"roles": {"goose": "chess_engine", "duck": "baseline"}},
    {"roles": {"goose": "model:missing", "duck": "baseline"}},
    {"seeds": [1, 1]},
    {"seeds": []},
    {"extraction_model": "gpt"},
    {"api_key": "sk-should-never-be-here"},
])
def test_invalid_run_spec_is_rejected(document):
    with pytest.raises(ValidationError):
        RunSpec.model_validate(document)


def test_load_run_spec_resolves_map_relative_to_the_spec(tmp_path):
    (tmp_path / "maps").mkdir()
    (tmp_path / "maps" / "tiny.yaml").write_text(
        "rooms: [cafeteria, medbay]\ncorridors:\n  - {a: cafeteria, b: medbay, weight: 1}\n")
    spec_file = tmp_path / "spec.yaml"
    spec_file.write_text("map: maps/tiny.yaml\nsetting: tiny\nseeds: [3]\n")

    spec = load_run_spec(spec_file)
    assert spec.map == str(tmp_path / "maps" / "tiny.yaml")
    assert spec.setting == "tiny"
    assert spec.seeds == [3]


def test_load_run_spec_errors_are_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_run_spec(tmp_path / "missing.yaml")

    broken = tmp_path / "broken.yaml"
    broken.write_text("config: {n_agents: [unclosed\n")
    with pytest.raises(ConfigError):
        load_run_spec(broken)

    typo = tmp_path / "typo.yaml"
    typo.write_text("config:\n  n_agent: 6\n")
    with pytest.raises(ConfigError, match="n_agent"):
        load_run_spec(typo)
