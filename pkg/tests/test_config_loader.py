"""Tests for configuration loading and validation."""

import json

import pytest

from src.exceptions import ConfigError
from src.io.config_loader import (SEED_ENV, benchmark_config_from_dict, design_from_dict,
                                  load_config, seed_override, sim_config_from_dict)


def test_load_yaml_and_json(tmp_path):
    yaml_file = tmp_path / "bench.yaml"
    yaml_file.write_text("setting: B\nmethods: [ehrjoint, iirr]\nn_reps: 5\n")
    json_file = tmp_path / "bench.json"
    json_file.write_text(json.dumps({"setting": "B", "methods": ["ehrjoint", "iirr"],
                                     "n_reps": 5}))
    assert load_config(yaml_file) == load_config(json_file)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    assert load_config(empty) == {}


def test_load_rejects_non_mapping(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(path)
    broken = tmp_path / "broken.yaml"
    broken.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(broken)


def test_setting_expands_to_cases(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    config = benchmark_config_from_dict({"setting": "B", "methods": ["EHRJoint"], "n_reps": 3,
                                         "seed": 4, "simulation": {"n_subjects": 50}})
    assert config.cases == ("2-1", "2-2", "2-3")
    assert config.methods == ("ehrjoint",)
    sim = config.sim_config("2-2")
    assert (sim.case_id, sim.seed, sim.n_subjects) == ("2-2", 4, 50)


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "77")
    assert seed_override(3) == 77
    config = benchmark_config_from_dict({"cases": ["1-1"], "methods": ["iirr"], "n_reps": 2,
                                         "seed": 3})
    assert config.seed == 77
    monkeypatch.setenv(SEED_ENV, "seven")
    with pytest.raises(ConfigError, match=SEED_ENV):
        seed_override(3)


@pytest.mark.parametrize("config, field", [
    ({"methods": ["iirr"], "n_reps": 2}, "cases"),
    ({"setting": "D", "methods": ["iirr"], "n_reps": 2}, "setting"),
    ({"cases": ["9-9"], "methods": ["iirr"], "n_reps": 2}, "cases"),
    ({"setting": "A", "methods": ["gee"], "n_reps": 2}, "methods"),
    ({"setting": "A", "methods": ["iirr"]}, "n_reps"),
    ({"setting": "A", "methods": ["iirr"], "n_reps": 1}, "n_reps"),
    ({"setting": "A", "methods": ["iirr"], "n_reps": 2, "reps": 3}, "reps"),
    ({"setting": "A", "methods": ["iirr"], "n_reps": 2, "simulation": {"seed": 1}}, "seed"),
    ({"setting": "A", "methods": ["iirr"], "n_reps": 2, "simulation": {"beta": [1]}}, "beta"),
    ({"setting": "A", "methods": ["iirr"], "n_reps": 2, "n_boot": 49}, "n_boot"),
])
def test_benchmark_errors_name_the_field(config, field, monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    with pytest.raises(ConfigError, match=field):
        benchmark_config_from_dict(config)


def test_sim_config_fields():
    config = sim_config_from_dict({"case_id": "3-2", "n_subjects": 10,
                                   "gamma": {"interval": 3.0}})
    assert config.gamma.interval == 3.0
    assert config.alpha == (-2.0, 2.0, 1.0)
    with pytest.raises(ConfigError, match="case_id"):
        sim_config_from_dict({"n_subjects": 10})
    with pytest.raises(ConfigError, match="speed"):
        sim_config_from_dict({"case_id": "1-1", "gamma": {"speed": 2.0}})


def test_design_from_dict():
    design = design_from_dict({"w_names": ["A"], "x_names": ["A", "Z"], "z_names": ["A"],
                               "include_time_fixed_effect": False})
    assert design.x_names == ("A", "Z")
    assert design.include_time_fixed_effect is False
    with pytest.raises(ConfigError, match="x_names"):
        design_from_dict({"x_names": "A"})
    with pytest.raises(ConfigError, match="z_names"):
        design_from_dict({"x_names": ["A"], "z_names": ["Z"]})


def test_benchmark_n_boot_is_optional(monkeypatch):
    """Without n_boot no coverage study is requested."""
    monkeypatch.delenv(SEED_ENV, raising=False)
    base = {"setting": "B", "methods": ["ehrjoint"], "n_reps": 2}
    assert benchmark_config_from_dict(base).n_boot is None
    assert benchmark_config_from_dict({**base, "n_boot": 50}).n_boot == 50
