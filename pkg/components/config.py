import copy
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from utils.errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.json"
CACHE_DIR_ENV = "MQ_CARDINAL_CACHE_DIR"
OUTPUT_FORMATS = ("json", "csv")

DEFAULT_CONFIG: Dict[str, Any] = {
    "periodization": {"tail_log_tol": -36.0, "max_shell": 64},
    "synthesis": {
        "target_accuracy_1d": 1e-9,
        "target_accuracy_2d": 1e-7,
        "spatial_radius": 8.0,
        "max_spectral_points": 4_000_000,
        "max_table_points": 20_000_000,
        "max_refinements": 12,
    },
    "coefficients": {"index_radius": 64, "oversampling": 8},
    "multiplier": {
        "h_list": [0.25, 0.125, 0.0625, 0.03125],
        "fd_step": 1e-3 * 2.0 * math.pi,
        "richardson_tol": 1e-5,
        "panel_base": 0.05,
        "order": 8,
        "shells": 2,
    },
    "bench": {
        "h_list_1d": [0.25, 0.125, 0.0625, 0.03125],
        "h_list_2d": [0.5, 0.25, 0.125],
        "grid_step_1d": 2.0 ** -8,
        "grid_step_2d": 2.0 ** -5,
        "window_factor": 1.5,
        "workers": 4,
    },
    "verify": {"determinism_criteria": [1, 2, 3, 5, 6, 7]},
    "output": {"format": "json", "cache_dir": ".cardinal_cache", "seed": 20240229},
}


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigComponent:
    @staticmethod
    def load_config(config_file: Optional[str] = None) -> Dict[str, Any]:
        """Defaults, overlaid with the config file and the cache-dir environment override"""
        config_file = config_file or CONFIG_FILE
        config = copy.deepcopy(DEFAULT_CONFIG)
        if os.path.exists(config_file):
            try:
                with open(config_file, "r") as f:
                    file_config = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                logger.error(f"Error loading config: {str(e)}")
                raise ConfigError(f"cannot read {config_file}: {str(e)}") from e
            if not isinstance(file_config, dict):
                raise ConfigError(f"{config_file} must hold a JSON object")
            config = _deep_merge(config, file_config)
        elif config_file != CONFIG_FILE:
            raise ConfigError(f"config file {config_file} does not exist")

        env_cache = os.environ.get(CACHE_DIR_ENV)
        if env_cache:
            config["output"]["cache_dir"] = env_cache
        return config

    @staticmethod
    def save_config(config: Dict[str, Any], config_file: Optional[str] = None) -> bool:
        """Save configuration to file"""
        try:
            with open(config_file or CONFIG_FILE, "w") as f:
                json.dump(config, f, indent=2)
            return True
        except OSError as e:
            logger.error(f"Error saving config: {str(e)}")
            return False


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on; echoed into output headers."""
    command: str
    params: Tuple[Tuple[str, Any], ...]
    output: Optional[str] = None
    format: str = "json"
    cache_dir: Optional[str] = None
    seed: int = 20240229
    settings: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.format not in OUTPUT_FORMATS:
            raise ConfigError(f"format must be one of {OUTPUT_FORMATS}, got '{self.format}'")

    @classmethod
    def from_args(cls, args, settings: Dict[str, Any]) -> "RunConfig":
        skip = {"command", "output", "format", "cache_dir", "seed", "config", "log_level", "handler"}
        params = tuple(sorted((k, v) for k, v in vars(args).items() if k not in skip and v is not None))
        output_cfg = settings.get("output", {})
        cache_dir = args.cache_dir if getattr(args, "cache_dir", None) else output_cfg.get("cache_dir")
        return cls(
            command=args.command,
            params=params,
            output=getattr(args, "output", None),
            format=getattr(args, "format", None) or output_cfg.get("format", "json"),
            cache_dir=cache_dir or None,
            seed=int(args.seed if getattr(args, "seed", None) is not None else output_cfg.get("seed", 20240229)),
            settings=settings,
        )

    def param(self, name: str, default: Any = None) -> Any:
        return dict(self.params).get(name, default)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in self.params},
            "format": self.format,
            "seed": self.seed,
        }
