import json
from unittest.mock import MagicMock

import pytest
import yaml

from crud.game_files import claims_path, log_path_for_seed, verdicts_path
from main import main
from schema.events import EventKind
import tools.business_logic.evaluation_flow as evaluation_flow
from tools.eventlog.event_log import read_log


def write_spec(tmp_path, **overrides):
    document = {
        "setting": "cli",
        "config": {"n_agents": 6, "n_ducks": 1},
        "roles": {"goose": "baseline", "duck": "baseline"},
        "seeds": [0, 1],
        "output_dir": str(tmp_path / "runs"),
    }
    document.update(overrides)
    path = tmp_path / "spec.yaml"
    path.write_text(yaml.safe_dump(document), encoding="utf-8")
    return path


@pytest.fixture
def played(tmp_path):
    spec = write_spec(tmp_path)
    assert main(["run", "--spec", str(spec)]) == 0
    return tmp_path / "runs"


def test_run_writes_one_log_per_seed(played):
    assert sorted(p.name for p in played.glob("*.log")) == ["0.log", "1.log"]
    assert read_log(played / "0.log").header.setting == "cli"


def test_seeds_flag_and_parallel_jobs(tmp_path):
    spec = write_spec(tmp_path)
    assert main(["run", "--spec", str(spec), "--seeds", "5,6", "--jobs", "2"]) == 0
    runs = tmp_path / "runs"
    assert sorted(p.name for p in runs.glob("*.log")) == ["5.log", "6.log"]

    sequential = tmp_path / "sequential"
    spec = write_spec(tmp_path, output_dir=str(sequential))
    assert main(["run", "--spec", str(spec), "--seeds", "5,6"]) == 0
    for seed in (5, 6):
        assert log_path_for_seed(runs, seed).read_bytes() == log_path_for_seed(sequential, seed).read_bytes()


def test_verify_report_replay_render(played, tmp_path, capsys):
    log = played / "0.log"
    assert main(["verify", "--log", str(log), "--extractor", "structured"]) == 0
    assert claims_path(log).exists() and verdicts_path(log).exists()
    assert "claims" in capsys.readouterr().out

    assert main(["report", "--dir", str(played), "--group", "setting", "--format", "tsv"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("group\tgames\tgoose_win_rate")
    assert (played / "summary.tsv").exists()

    assert main(["replay", "--log", str(log)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("tick 0 ")
    assert lines[-1].endswith(" ok")

    out_dir = tmp_path / "views"
    assert main(["render", "--log", str(log), "--tick", "0", "--viewer", "Alice", "--out", str(out_dir)]) == 0
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "Alice_t0_global.svg", "Alice_t0_local.svg", "Alice_t0_summary.txt"]


def test_validation_errors_exit_with_1(played, tmp_path):
    log = str(played / "0.log")
    assert main(["run", "--spec", str(tmp_path / "missing.yaml")]) == 1
    assert main(["run", "--spec", str(write_spec(tmp_path, seeds=[]))]) == 1
    assert main(["run", "--spec", str(write_spec(tmp_path)), "--seeds", "1,x"]) == 1
    assert main(["render", "--log", log, "--tick", "9999", "--viewer", "Alice"]) == 1
    assert main(["render", "--log", log, "--tick", "0", "--viewer", "Zed"]) == 1
    assert main(["verify", "--log", str(tmp_path / "nothing.log")]) == 1
    assert main(["report", "--dir", str(tmp_path / "nowhere")]) == 1


def test_bad_flags_exit_with_1():
    with pytest.raises(SystemExit) as exit_info:
        main(["run"])
    assert exit_info.value.code == 1
    with pytest.raises(SystemExit) as exit_info:
        main(["verify", "--log", "x.log", "--extractor", "psychic"])
    assert exit_info.value.code == 1


def test_model_binding_needs_its_key_in_the_environment(tmp_path, monkeypatch):
    monkeypatch.delenv("GOOSE_DUCK_CLI_KEY", raising=False)
    spec = write_spec(tmp_path, roles={"goose": "baseline", "duck": "model:gpt"},
                      models={"gpt": {"model": "gpt-4o-mini", "api_key_env": "GOOSE_DUCK_CLI_KEY"}})
    assert main(["run", "--spec", str(spec)]) == 1
    assert not (tmp_path / "runs").exists()


def test_dead_viewer_cannot_render(played):
    for path in sorted(played.glob("*.log")):
        log = read_log(path)
        kill = next((e for e in log.events if e.kind == EventKind.KILLED), None)
        if kill is not None:
            final = log.events[-1].tick
            assert main(["render", "--log", str(path), "--tick", str(final), "--viewer",
                         kill.payload["target"]]) == 1
            return
    pytest.skip("no kill in the played seeds")


def test_tampered_log_fails_replay_with_2(played, tmp_path):
    lines = (played / "1.log").read_text(encoding="utf-8").splitlines()
    game_over = json.loads(lines[-1])
    game_over["payload"]["state_digest"] = "0" * 64
    lines[-1] = json.dumps(game_over)
    tampered = tmp_path / "tampered.log"
    tampered.write_text("\n".join(lines) + "\n", encoding="utf-8")
    assert main(["replay", "--log", str(tampered)]) == 2


def test_aborted_game_exits_with_2(tmp_path, monkeypatch):
    def crash(*args):
        raise RuntimeError("policy crashed")

    policy = MagicMock()
    policy.act.side_effect = policy.speak.side_effect = policy.vote.side_effect = crash
    monkeypatch.setattr(evaluation_flow, "make_scripted", lambda *args: policy)
    assert main(["run", "--spec", str(write_spec(tmp_path, seeds=[0]))]) == 2
    assert (tmp_path / "runs" / "0.log.partial").exists()
    assert not (tmp_path / "runs" / "0.log").exists()
