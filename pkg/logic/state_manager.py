"""
state_manager.py - Workbench configuration

One JSON document with sections mirroring the domain types. Every random
consumer is seeded from `master_seed`; the seeding streams keep scenario,
noise, split, initialization, batching and dropout draws apart.
"""
import copy
import json
import logging
from pathlib import Path

from logic.channel_model import AoaGrid, ScenarioParams
from logic.errors import ConfigurationError
from logic.learning import TRAIN_FRACTION, TrainingConfig
from logic.pilot_design import DEFAULT_MAX_LISTED_PAIRS, design_pilot
from logic.quantized_frontend import NoiseSpec
from logic.sweep_processor import ExperimentPlan

logger = logging.getLogger(__name__)

CONFIG_FORMAT_VERSION = "1.0"

DEFAULTS = {
    "scenario": {
        "num_antennas": 64,
        "num_users": 200,
        "num_paths": 1,
        "aoa_grid": {"min_separation": 0.01},
        "gain_model": "unit",
        "layout": "independent",
        "element_spacing": 0.5,
    },
    "pilot": {"length": 8, "power": 1.0},
    "noise": {"mode": "noiseless", "snr_db": None, "snr_range": None},
    "training": {k: v for k, v in TrainingConfig().to_dict().items() if k != "seed"},
    "sweep": {
        "antenna_counts": [2, 8, 32, 64],
        "pilot_lengths": [2, 5, 10],
        "snr_points": [0.0, 10.0],
        "estimators": ["mlp"],
        "rho_db": 0.0,
        "train_fraction": TRAIN_FRACTION,
        "analyze_alpha": False,
    },
    "analysis": {
        "pilot_lengths": [],
        "antenna_counts": [],
        "max_listed_pairs": DEFAULT_MAX_LISTED_PAIRS,
    },
    "paths": {"output_dir": "output", "dataset": None, "checkpoint": None},
}

# sub-documents taken as a whole instead of merged key by key
_OPAQUE = {"scenario.aoa_grid": {"min_separation", "aoas"}}


def _merge(defaults, data, prefix):
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config section '{prefix}' must be an object")
    merged = copy.deepcopy(defaults)
    for key, value in data.items():
        dotted = f"{prefix}.{key}" if prefix else key
        if key not in defaults:
            raise ConfigurationError(f"Unknown config key '{dotted}'")
        if dotted in _OPAQUE:
            if not isinstance(value, dict):
                raise ConfigurationError(f"Config key '{dotted}' must be an object")
            for sub in value:
                if sub not in _OPAQUE[dotted]:
                    raise ConfigurationError(f"Unknown config key '{dotted}.{sub}'")
            merged[key] = copy.deepcopy(value)
        elif isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value, dotted)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_snr_point(point, seed=0):
    """A number is a fixed SNR in dB, "noiseless" is no noise, [low, high] is a mixed-SNR range"""
    if point is None or point == "noiseless":
        return NoiseSpec.noiseless(seed)
    if isinstance(point, (list, tuple)):
        if len(point) != 2:
            raise ConfigurationError(f"Mixed SNR point needs [low, high], got {point!r}")
        return NoiseSpec.mixed(float(point[0]), float(point[1]), seed)
    if isinstance(point, (int, float)) and not isinstance(point, bool):
        return NoiseSpec.fixed(float(point), seed)
    raise ConfigurationError(f"Cannot read SNR point {point!r}")


class WorkbenchConfig:
    def __init__(self, master_seed=0, **sections):
        self.master_seed = master_seed
        self.format_version = CONFIG_FORMAT_VERSION
        merged = _merge(DEFAULTS, sections, "")
        self.scenario = merged["scenario"]
        self.pilot = merged["pilot"]
        self.noise = merged["noise"]
        self.training = merged["training"]
        self.sweep = merged["sweep"]
        self.analysis = merged["analysis"]
        self.paths = merged["paths"]
        self.validate()

    def to_dict(self):
        """Convert the config to a serializable dictionary."""
        return {
            "format_version": self.format_version,
            "master_seed": self.master_seed,
            "scenario": copy.deepcopy(self.scenario),
            "pilot": copy.deepcopy(self.pilot),
            "noise": copy.deepcopy(self.noise),
            "training": copy.deepcopy(self.training),
            "sweep": copy.deepcopy(self.sweep),
            "analysis": copy.deepcopy(self.analysis),
            "paths": copy.deepcopy(self.paths),
        }

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("A workbench config must be a JSON object")
        data = dict(data)
        version = str(data.pop("format_version", CONFIG_FORMAT_VERSION))
        if version.split(".")[0] != CONFIG_FORMAT_VERSION.split(".")[0]:
            raise ConfigurationError(f"Config format_version {version} is not supported")
        master_seed = data.pop("master_seed", 0)
        return cls(master_seed=master_seed, **data)

    def __eq__(self, other):
        if not isinstance(other, WorkbenchConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return f"WorkbenchConfig(master_seed={self.master_seed})"

    @classmethod
    def load(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config {path} is not valid JSON (line {e.lineno}): {e.msg}") from e
        except OSError as e:
            raise ConfigurationError(f"Cannot read config {path}: {e}") from e
        logger.info("Loaded config %s", path)
        return cls.from_dict(data)

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=4)
        return path

    def with_overrides(self, seed=None, output_dir=None, precision=None):
        """Copy with command-line overrides applied"""
        data = self.to_dict()
        if seed is not None:
            data["master_seed"] = seed
        if output_dir is not None:
            data["paths"]["output_dir"] = str(output_dir)
        if precision is not None:
            data["training"]["precision"] = precision
        return WorkbenchConfig.from_dict(data)

    def validate(self):
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigurationError(f"master_seed must be a non-negative integer, got {self.master_seed!r}")
        try:
            self.scenario_params()
            self.training_config()
            self.noise_spec()
            self.pilot_sequence()
            self.snr_points()
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigurationError):
                raise
            raise ConfigurationError(f"Invalid config value: {e}") from e
        for name in ("pilot_lengths", "antenna_counts"):
            if not isinstance(self.analysis[name], list):
                raise ConfigurationError(f"analysis.{name} must be a list")

    # builders: every seed below is master_seed, the stream id tells the draws apart

    def scenario_params(self):
        values = dict(self.scenario)
        values["aoa_grid"] = AoaGrid.from_dict(values["aoa_grid"])
        return ScenarioParams(seed=self.master_seed, **values)

    def pilot_sequence(self, length=None):
        return design_pilot(length or self.pilot["length"], self.pilot["power"])

    def noise_spec(self):
        snr_range = self.noise["snr_range"]
        return NoiseSpec(mode=self.noise["mode"], snr_db=self.noise["snr_db"],
                         snr_range=tuple(snr_range) if snr_range is not None else None,
                         seed=self.master_seed)

    def training_config(self):
        return TrainingConfig(seed=self.master_seed, **self.training)

    def snr_points(self):
        return tuple(parse_snr_point(p, self.master_seed) for p in self.sweep["snr_points"])

    @property
    def shuffle_seed(self):
        return self.master_seed

    @property
    def output_dir(self):
        return Path(self.paths["output_dir"])

    def experiment_plan(self):
        sweep = self.sweep
        dataset = self.paths["dataset"]
        return ExperimentPlan(
            antenna_counts=tuple(int(m) for m in sweep["antenna_counts"]),
            pilot_lengths=tuple(int(n) for n in sweep["pilot_lengths"]),
            snr_points=self.snr_points(),
            scenario=None if dataset else self.scenario_params(),
            dataset_path=dataset,
            trainer=self.training_config(),
            estimators=tuple(sweep["estimators"]),
            rho_db=float(sweep["rho_db"]),
            pilot_power=float(self.pilot["power"]),
            train_fraction=float(sweep["train_fraction"]),
            shuffle_seed=self.shuffle_seed,
            analyze_alpha=bool(sweep["analyze_alpha"]),
            output_dir=str(self.output_dir),
        )
