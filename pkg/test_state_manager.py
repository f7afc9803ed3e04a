import json
from pathlib import Path

import pytest

from logic.errors import ConfigurationError
from logic.state_manager import DEFAULTS, WorkbenchConfig, parse_snr_point

CONFIG_DIR = Path(__file__).parent / "configs"


class TestDefaults:
    def test_defaults_are_valid(self):
        config = WorkbenchConfig()
        assert config.master_seed == 0
        assert config.scenario_params().num_antennas == DEFAULTS["scenario"]["num_antennas"]
        assert config.pilot_sequence().length == 8
        assert config.noise_spec().noiseless
        assert config.training_config().precision == "f32"

    def test_every_seed_is_the_master_seed(self):
        config = WorkbenchConfig(master_seed=42, noise={"mode": "fixed", "snr_db": 3.0})
        assert config.scenario_params().seed == 42
        assert config.noise_spec().seed == 42
        assert config.training_config().seed == 42
        assert config.shuffle_seed == 42
        assert all(point.seed == 42 for point in config.snr_points())


class TestMerging:
    def test_partial_section_keeps_defaults(self):
        config = WorkbenchConfig(scenario={"num_users": 30})
        assert config.scenario["num_users"] == 30
        assert config.scenario["num_paths"] == DEFAULTS["scenario"]["num_paths"]

    def test_unknown_key_is_named(self):
        with pytest.raises(ConfigurationError, match="Unknown config key 'scenario.num_antenas'"):
            WorkbenchConfig(scenario={"num_antenas": 4})

    def test_unknown_section(self):
        with pytest.raises(ConfigurationError, match="'plots'"):
            WorkbenchConfig(plots={})

    def test_aoa_grid_is_replaced_whole(self):
        config = WorkbenchConfig(scenario={"num_users": 2, "aoa_grid": {"aoas": [0.1, 0.5]}})
        assert config.scenario["aoa_grid"] == {"aoas": [0.1, 0.5]}
        assert config.scenario_params().aoa_grid.aoas == (0.1, 0.5)

    def test_aoa_grid_unknown_key(self):
        with pytest.raises(ConfigurationError, match="scenario.aoa_grid.spacing"):
            WorkbenchConfig(scenario={"aoa_grid": {"spacing": 0.1}})

    def test_defaults_are_not_shared(self):
        config = WorkbenchConfig()
        config.sweep["antenna_counts"].append(1000)
        assert 1000 not in WorkbenchConfig().sweep["antenna_counts"]


class TestValidation:
    @pytest.mark.parametrize("seed", [-1, "7", 1.5, True])
    def test_master_seed(self, seed):
        with pytest.raises(ConfigurationError):
            WorkbenchConfig(master_seed=seed)

    @pytest.mark.parametrize("sections", [
        {"pilot": {"length": 0}},
        {"pilot": {"power": -1.0}},
        {"noise": {"mode": "fixed"}},
        {"training": {"precision": "f16"}},
        {"scenario": {"gain_model": "rician"}},
        {"sweep": {"snr_points": ["loud"]}},
        {"analysis": {"pilot_lengths": 4}},
    ])
    def test_invalid_values(self, sections):
        with pytest.raises(ConfigurationError):
            WorkbenchConfig(**sections)


class TestSnrPoints:
    def test_forms(self):
        assert parse_snr_point(10).label == "10dB"
        assert parse_snr_point("noiseless").noiseless
        assert parse_snr_point(None).noiseless
        mixed = parse_snr_point([0, 10], seed=3)
        assert mixed.snr_range == (0.0, 10.0)
        assert mixed.seed == 3

    @pytest.mark.parametrize("point", ["loud", True, [1, 2, 3]])
    def test_invalid(self, point):
        with pytest.raises(ConfigurationError):
            parse_snr_point(point)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        config = WorkbenchConfig(master_seed=5, scenario={"num_users": 30}, sweep={"snr_points": [[0, 5], 10.0]})
        path = config.save(tmp_path / "nested" / "config.json")
        assert WorkbenchConfig.load(path) == config
        assert WorkbenchConfig.from_dict(config.to_dict()) == config

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="not valid JSON"):
            WorkbenchConfig.load(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            WorkbenchConfig.load(tmp_path / "absent.json")

    def test_newer_format(self):
        with pytest.raises(ConfigurationError):
            WorkbenchConfig.from_dict({"format_version": "2.0"})

    def test_not_an_object(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps([1, 2]), encoding="utf-8")
        with pytest.raises(ConfigurationError):
            WorkbenchConfig.load(path)

    @pytest.mark.parametrize("name", ["example_config.json", "desk_scale.json"])
    def test_shipped_configs_load(self, name):
        config = WorkbenchConfig.load(CONFIG_DIR / name)
        assert config.experiment_plan().cells


class TestBuilders:
    def test_overrides(self, tmp_path):
        config = WorkbenchConfig(master_seed=1).with_overrides(seed=9, output_dir=tmp_path, precision="f64")
        assert config.master_seed == 9
        assert config.output_dir == tmp_path
        assert config.training_config().precision == "f64"

    def test_experiment_plan_from_scenario(self):
        config = WorkbenchConfig(master_seed=3, sweep={"antenna_counts": [4], "pilot_lengths": [2],
                                                       "snr_points": ["noiseless", [0, 10]],
                                                       "estimators": ["nearest_neighbor"]})
        plan = config.experiment_plan()
        assert plan.scenario == config.scenario_params()
        assert plan.dataset_path is None
        assert [p.label for p in plan.snr_points] == ["noiseless", "0-10dB"]
        assert plan.shuffle_seed == 3

    def test_experiment_plan_from_dataset(self):
        plan = WorkbenchConfig(paths={"dataset": "data/channels.json"}).experiment_plan()
        assert plan.scenario is None
        assert plan.dataset_path == "data/channels.json"

    def test_pilot_length_override(self):
        assert WorkbenchConfig().pilot_sequence(3).length == 3
