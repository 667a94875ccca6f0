import json

import pytest

from semdvc.config import CONFIG_SCHEMA, ConfigError, RunConfig, defaults_help


def test_shipped_defaults_match_operating_point():
    cfg = RunConfig()
    assert cfg["concepts.count"] == 100
    assert cfg["queries.count"] == 35
    assert cfg["counter.maxEvents"] == 10  # k_num has 11 entries
    assert cfg["resize.length"] == 1024
    assert cfg["labels.size"] == 25
    assert cfg["fusion.mode"] == "late"


def test_unknown_keys_all_reported():
    with pytest.raises(ConfigError) as err:
        RunConfig({"bogus.one": 1, "bogus.two": 2})
    assert "bogus.one" in str(err.value)
    assert "bogus.two" in str(err.value)


def test_type_coercion_from_strings():
    cfg = RunConfig({"train.lr": "0.01", "train.epochs": "7", "concepts.enabled": "false"})
    assert cfg["train.lr"] == 0.01
    assert cfg["train.epochs"] == 7
    assert cfg["concepts.enabled"] is False


def test_bad_boolean_rejected():
    with pytest.raises(ConfigError, match="boolean"):
        RunConfig({"concepts.enabled": "maybe"})


def test_explicit_tracking():
    cfg = RunConfig({"labels.size": 8})
    assert cfg.is_explicit("labels.size")
    assert not cfg.is_explicit("model.dim")


def test_load_file_with_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"train.epochs": 3, "model.dim": 64}))
    cfg = RunConfig.load(path, {"train.epochs": 9})
    assert cfg["train.epochs"] == 9
    assert cfg["model.dim"] == 64


def test_env_seed_override(tmp_path, monkeypatch):
    monkeypatch.setenv("DVC_SEED", "123")
    cfg = RunConfig.load(None, {"seed": 5})
    assert cfg["seed"] == 123


def test_resolved_covers_every_key():
    resolved = RunConfig().resolved()
    assert set(resolved) == set(CONFIG_SCHEMA)


def test_snapshot_round_trip(tmp_path):
    cfg = RunConfig({"model.dim": 48})
    cfg.snapshot(tmp_path / "snap.json")
    back = RunConfig.load(tmp_path / "snap.json")
    assert back["model.dim"] == 48
    assert back.resolved() == cfg.resolved()


def test_defaults_help_mentions_every_key():
    text = defaults_help()
    for key in CONFIG_SCHEMA:
        assert key in text
