from dataclasses import fields

import pytest
import yaml

from mfcv.config import ConfigError, ExperimentConfig, from_dict, parse_config, with_strategy
from mfcv.cost import CostParams


def write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data) if not isinstance(data, str) else data)
    return path


def test_minimal_config_fills_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, {"benchmark": "multimodal", "strategy": "mfcv", "seed": 7}))
    assert cfg.iterations == 50
    assert (cfg.n_seed, cfg.n_test) == (20, 60)
    assert cfg.cost == CostParams(500.0, 10.0, 0.1)
    assert (cfg.fantasy_samples, cfg.gp_restarts, cfg.batch_size) == (64, 10, 1)
    assert cfg.strategy == ("mfcv",)
    assert cfg.levels is None


def test_hartmann_defaults_scale_with_dimension():
    cfg = ExperimentConfig("hartmann6", seed=0)
    assert (cfg.n_seed, cfg.n_test) == (60, 180)


def test_batch_of_four_for_thirteen_iterations():
    cfg = parse_config(benchmark="ishigami", seed=1, batch_size=4, iterations=13, levels=[0, 0.5, 1])
    assert (cfg.batch_size, cfg.iterations, cfg.levels) == (4, 13, (0.0, 0.5, 1.0))


@pytest.mark.parametrize(
    "raw, field",
    [
        ({"benchmark": "branin", "seed": 1}, "benchmark"),
        ({"benchmark": "multimodal"}, "seed"),
        ({"seed": 1}, "benchmark"),
        ({"benchmark": "multimodal", "seed": 1, "batch_size": 0}, "batch_size"),
        ({"benchmark": "multimodal", "seed": 1, "iterations": 0}, "iterations"),
        ({"benchmark": "multimodal", "seed": 1, "repetitions": 0}, "repetitions"),
        ({"benchmark": "multimodal", "seed": 1, "strategy": "hf", "levels": [0.0, 0.5]}, "levels"),
        ({"benchmark": "multimodal", "seed": 1, "levels": [0.5, 1.5]}, "levels"),
        ({"benchmark": "multimodal", "seed": 1, "strategy": "random"}, "strategy"),
        ({"benchmark": "multimodal", "seed": 1, "strategy": ["hf", "hf"]}, "strategy"),
        ({"benchmark": "multimodal", "seed": "x"}, "seed"),
        ({"benchmark": "multimodal", "seed": 1, "cost": {"c0": -1}}, "cost"),
        ({"benchmark": "multimodal", "seed": 1, "cost": {"c9": 1}}, "cost"),
        ({"benchmark": "multimodal", "seed": 1, "gp": {"restarts": 0}}, "gp_restarts"),
        ({"benchmark": "multimodal", "seed": 1, "gp": {"steps": 3}}, "gp.steps"),
        ({"benchmark": "multimodal", "seed": 1, "acquisition": {"utility": "max"}}, "utility"),
        ({"benchmark": "multimodal", "seed": 1, "colour": "red"}, "colour"),
        ({"benchmark": "multimodal", "seed": 1, "n_seed": 1}, "n_seed"),
        ({"benchmark": "multimodal", "seed": 1, "cost_cap": -5}, "cost_cap"),
    ],
)
def test_rejections_name_the_field(raw, field):
    with pytest.raises(ConfigError) as err:
        from_dict(raw)
    assert err.value.field == field
    assert field in str(err.value)


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "benchmark: [unclosed"))
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "- a\n- b\n"))


def test_flags_override_file(tmp_path):
    path = write(tmp_path, {"benchmark": "multimodal", "seed": 1, "iterations": 5,
                            "gp": {"restarts": 3}, "acquisition": {"fantasy_samples": 16}})
    cfg = parse_config(path, seed=9, iterations=None, fantasy_samples=32, strategy=["hf", "sobol"])
    assert (cfg.seed, cfg.iterations, cfg.gp_restarts, cfg.fantasy_samples) == (9, 5, 3, 32)
    assert cfg.strategy == ("hf", "sobol")
    with pytest.raises(ConfigError):
        parse_config(path, bogus=1)


def test_echo_round_trip(tmp_path):
    cfg = parse_config(
        benchmark="ishigami", seed=4, levels=[1, 0, 0.5], strategy=["mfcv", "sobol"], batch_size=2,
        iterations=7, repetitions=3, cost_cap=900.0, candidate_grid_size=64, utility="total",
    )
    back = parse_config(write(tmp_path, cfg.to_yaml(), "echo.yaml"))
    for f in fields(ExperimentConfig):
        assert getattr(back, f.name) == getattr(cfg, f.name), f.name
    assert back == cfg


def test_hf_acquisition_is_restricted_to_target():
    cfg = ExperimentConfig("multimodal", seed=0, strategy=("mfcv", "hf"))
    assert cfg.acquisition_config("hf").fidelity_space == (1.0,)
    assert cfg.acquisition_config("mfcv").fidelity_space is None
    assert with_strategy(cfg, "hf").strategy == ("hf",)
