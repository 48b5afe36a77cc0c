import argparse
import json

import pytest

from components.config import CACHE_DIR_ENV, DEFAULT_CONFIG, ConfigComponent, RunConfig
from utils.errors import ConfigError


@pytest.fixture
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(CACHE_DIR_ENV, raising=False)
    return tmp_path


def test_defaults_without_file(isolated):
    config = ConfigComponent.load_config()
    assert config == DEFAULT_CONFIG
    config["synthesis"]["spatial_radius"] = 99.0
    assert DEFAULT_CONFIG["synthesis"]["spatial_radius"] == 8.0


def test_file_overrides_merge_per_key(isolated):
    path = isolated / "custom.json"
    path.write_text(json.dumps({"synthesis": {"spatial_radius": 12.0}, "extra": 1}))
    config = ConfigComponent.load_config(str(path))
    assert config["synthesis"]["spatial_radius"] == 12.0
    assert config["synthesis"]["target_accuracy_1d"] == DEFAULT_CONFIG["synthesis"]["target_accuracy_1d"]
    assert config["extra"] == 1


def test_env_overrides_cache_dir(isolated, monkeypatch):
    monkeypatch.setenv(CACHE_DIR_ENV, str(isolated / "tables"))
    assert ConfigComponent.load_config()["output"]["cache_dir"] == str(isolated / "tables")


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_malformed_file(isolated, content):
    path = isolated / "bad.json"
    path.write_text(content)
    with pytest.raises(ConfigError):
        ConfigComponent.load_config(str(path))


def test_missing_explicit_file(isolated):
    with pytest.raises(ConfigError):
        ConfigComponent.load_config(str(isolated / "missing.json"))


def test_save_and_reload(isolated):
    config = ConfigComponent.load_config()
    config["bench"]["workers"] = 2
    path = str(isolated / "saved.json")
    assert ConfigComponent.save_config(config, path)
    assert ConfigComponent.load_config(path) == config
    assert not ConfigComponent.save_config(config, str(isolated / "no" / "such" / "dir.json"))


def _namespace(**overrides):
    values = {"command": "converge", "output": None, "format": None, "cache_dir": None, "seed": None,
              "config": None, "log_level": "INFO", "alpha": 0.5, "h": (0.25, 0.125, 0.0625), "window": None}
    values.update(overrides)
    return argparse.Namespace(**values)


def test_run_config_from_args():
    run = RunConfig.from_args(_namespace(), DEFAULT_CONFIG)
    assert run.params == (("alpha", 0.5), ("h", (0.25, 0.125, 0.0625)))
    assert run.format == "json"
    assert run.seed == DEFAULT_CONFIG["output"]["seed"]
    assert run.cache_dir == DEFAULT_CONFIG["output"]["cache_dir"]
    assert run.param("alpha") == 0.5
    assert run.param("window", 1.5) == 1.5
    assert run.to_dict() == {"command": "converge", "params": {"alpha": 0.5, "h": [0.25, 0.125, 0.0625]},
                             "format": "json", "seed": DEFAULT_CONFIG["output"]["seed"]}


def test_run_config_arguments_win():
    run = RunConfig.from_args(_namespace(format="csv", seed=3, cache_dir="/tmp/tables"), DEFAULT_CONFIG)
    assert (run.format, run.seed, run.cache_dir) == ("csv", 3, "/tmp/tables")


def test_run_config_equality_ignores_settings():
    a = RunConfig.from_args(_namespace(), DEFAULT_CONFIG)
    b = RunConfig.from_args(_namespace(), {"output": DEFAULT_CONFIG["output"], "bench": {"workers": 8}})
    assert a == b
    assert hash(a) == hash(b)


def test_run_config_rejects_format():
    with pytest.raises(ConfigError):
        RunConfig(command="verify", params=(), format="xml")
