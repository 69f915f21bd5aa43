#!/usr/bin/env python3
"""
Tests for config loading, overrides and validation.
"""
import math

import pytest

import config
from contracts.errors import ConfigError


def _write(tmp_path, text: str):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_defaults():
    cfg = config.load_config()
    pipe = cfg.pipeline_config()
    assert (pipe.k, pipe.budget, pipe.folds, pipe.mode, pipe.loss) == (2, 2000.0, 5, "cv", "smoothed")
    assert pipe.cv_split == [0.125, 0.25, 0.625]
    assert pipe.budget_split() == [1 / 8, 7 / 8]
    assert (pipe.min_cv_labels, pipe.band_floor, pipe.trust_radius) == (20, 3.0, 0.5)
    assert pipe.kernel.family == "gaussian"
    assert pipe.kernel.tail_coefficient == pytest.approx(math.sqrt(math.log(2000)))
    exp = cfg.experiment_config()
    assert exp.budget == pipe.budget


def test_precedence(tmp_path):
    path = _write(tmp_path, "seed = 4\n[pipeline]\nbudget = 500\nk = 3\n[data]\nd = 20\n")
    cfg = config.load_config(path, ["pipeline.budget=800"], {"pipeline.k": 1, "data.d": None})
    assert cfg.seed == 4
    assert cfg.pipeline.budget == 800
    assert cfg.pipeline.k == 1
    assert cfg.data.d == 20


def test_override_parsing():
    assert config.parse_override("pipeline.b_grid=[0.5, 1.0]") == {"pipeline.b_grid": [0.5, 1.0]}
    assert config.parse_override("kernel.name=epanechnikov") == {"kernel.name": "epanechnikov"}
    assert config.parse_override("bench.detail = true") == {"bench.detail": True}
    with pytest.raises(ConfigError):
        config.parse_override("pipeline.k")
    with pytest.raises(ConfigError):
        config.parse_override("=3")


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError) as info:
        config.load_config(None, ["pipeline.bogus=1"])
    assert info.value.key == "pipeline.bogus"
    assert "pipeline.bogus" in str(info.value)
    with pytest.raises(ConfigError) as info:
        config.load_config(_write(tmp_path, "[solver]\nspeed = 2\n"))
    assert info.value.key == "solver.speed"


def test_invalid_values_name_the_key():
    with pytest.raises(ConfigError) as info:
        config.load_config(None, ["data.d=0"])
    assert info.value.key == "data.d"
    assert info.value.exit_code == 2

    cfg = config.load_config(None, ["pipeline.split=[0.5, 0.6]"])
    with pytest.raises(ConfigError) as info:
        cfg.pipeline_config()
    assert info.value.key == "pipeline.split"

    cfg = config.load_config(None, ["solver.nu=2"])
    with pytest.raises(ConfigError) as info:
        cfg.pipeline_config()
    assert info.value.key == "solver.nu"

    cfg = config.load_config(None, ["kernel.name=higher_order"])
    with pytest.raises(ConfigError) as info:
        cfg.pipeline_config()
    assert info.value.key == "kernel.order"


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        config.load_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        config.load_config(_write(tmp_path, "[pipeline\nk = 2\n"))


def test_every_section_field_is_documented():
    sections = {
        "pipeline": config.PipelineSection, "theory": config.TheoryConfig, "kernel": config.KernelConfig,
        "solver": config.SolverSection, "data": config.DataConfig, "bench": config.BenchConfig,
    }
    for name, model in sections.items():
        for field in model.model_fields:
            assert f"{name}.{field}" in config.CONFIG_KEYS
    assert "pipeline.budget" in config.describe_keys()
