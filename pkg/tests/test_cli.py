import json

import pytest

from bftlab import cli
from bftlab.harness.scenario import load
from bftlab.simnet.trace import Trace


def exit_code(argv):
    try:
        return cli.main(argv)
    except SystemExit as exc:
        return exc.code


def test_every_preset_validates():
    for name in cli.PRESETS:
        doc = load(cli.preset_path(name))
        assert doc.name == name


def test_run_preset_exit_zero(tmp_path, capsys):
    assert cli.main(["run", "--preset", "happy_path_fhs", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "report.json").exists()
    assert "happy_path_fhs" in capsys.readouterr().err


def test_preset_equals_file(tmp_path, capsys):
    cli.main(["run", "--preset", "aggqc_failover", "--out", str(tmp_path / "a")])
    by_preset = capsys.readouterr().out
    cli.main(["run", str(cli.preset_path("aggqc_failover")), "--out", str(tmp_path / "b")])
    by_file = capsys.readouterr().out
    assert by_preset == by_file
    for name in ("trace.jsonl", "report.json", "metrics.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worstcase_rotation_shows_f_plus_one_commits(capsys):
    assert cli.main(["run", "--preset", "worstcase_rotation", "--format", "jsonl"]) == 0
    row = json.loads(capsys.readouterr().out.splitlines()[0])
    assert row["committed_per_rotation"][0] == 14
    assert row["honest_committed_per_rotation"][0] == 1


@pytest.mark.parametrize("argv", [
    ["run", "--preset", "no_such_preset"],
    ["run", "--bogus"],
    ["frobnicate"],
    [],
    ["run"],
    ["fuzz", "--preset", "twins_safety"],
    ["fuzz", "--seeds", "0", "--preset", "twins_safety"],
    ["run", "--format", "xml", "--preset", "happy_path_fhs"],
])
def test_usage_errors_exit_64(argv, capsys):
    assert exit_code(argv) == 64


def test_config_error_exit_4(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("n: 5\nf: 1\n")
    assert cli.main(["run", str(p)]) == 4
    assert f"{p}:1:" in capsys.readouterr().err


def test_sweep_requires_sweep_file(capsys):
    assert cli.main(["sweep", "--preset", "happy_path_fhs"]) == 4


def test_seed_override(tmp_path):
    cli.main(["run", "--preset", "aggqc_failover", "--seed", "7", "--out", str(tmp_path)])
    assert Trace.read(tmp_path / "trace.jsonl").config["seed"] == 7


def test_out_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("BFTLAB_OUT", str(tmp_path))
    cli.main(["run", "--preset", "aggqc_failover", "--format", "jsonl"])
    assert (tmp_path / "metrics.jsonl").exists()


def test_fuzz_summary(tmp_path, capsys):
    code = cli.main(["fuzz", "--seeds", "12", "--preset", "twins_safety", "--out", str(tmp_path)])
    summary = json.loads(capsys.readouterr().out)
    assert code == 0 and summary["runs"] == 12 and summary["safety_failures"] == []
    assert json.loads((tmp_path / "fuzz.json").read_text()) == summary


def test_replay_matches_prefix(tmp_path, capsys):
    cli.main(["run", "--preset", "aggqc_failover", "--out", str(tmp_path)])
    capsys.readouterr()
    code = cli.main(["replay", str(tmp_path / "trace.jsonl"), "--until", "150", "--out", str(tmp_path)])
    assert code == 0
    replay = Trace.read(tmp_path / "replay-150.jsonl")
    assert replay.end["stop"] == "until_event"


def test_replay_detects_divergence(tmp_path, capsys):
    cli.main(["run", "--preset", "aggqc_failover", "--out", str(tmp_path)])
    t = Trace.read(tmp_path / "trace.jsonl")
    t.records[5]["t"] += 1
    t.write(tmp_path / "edited.jsonl")
    assert cli.main(["replay", str(tmp_path / "edited.jsonl"), "--until", "150"]) == 4


def test_presets_listing(capsys):
    assert cli.main(["presets"]) == 0
    assert capsys.readouterr().out.split() == list(cli.PRESETS)
