"""
Run configuration.

Defaults, overridden by a JSON config file, overridden by command-line
flags. The resolved configuration (seed included) is written beside every
run's outputs.
"""

import copy
import json
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from .estimation.hidden_em import HiddenEMConfig
from .estimation.mcem import EMConfig
from .estimation.moments import MoMConfig
from .exceptions import UsageError


def _defaults_of(cls) -> Dict[str, Any]:
    values = cls().to_dict()
    values.pop("seed", None)
    values.pop("progress", None)
    return values


class RunConfig:
    """
    Resolved settings of one command invocation.

    Args:
        config_file: Optional JSON file with settings to merge over the defaults
    """

    def __init__(self, config_file: Optional[Union[str, Path]] = None):
        self.settings: Dict[str, Any] = {
            "seed": None,
            "output_dir": "runs",
            "run_name": None,
            "simulate": {"t_end": 10.0, "snapshot_times": [], "random_initial": False},
            "em": _defaults_of(EMConfig),
            "mom": _defaults_of(MoMConfig),
            "hidden_em": _defaults_of(HiddenEMConfig),
            "mh": {"burn_in": 10000, "samples": 100, "thin": 1000, "rate_scale": 1.0, "grid": 20},
            "preprocess": {"threshold": 5, "jitter": 1e-5, "t_start": None, "t_end": None,
                           "min_sent": 0, "min_received": 0},
        }
        self.config_file = str(config_file) if config_file else None
        if config_file:
            self._load_config(config_file)

    def _load_config(self, config_file: Union[str, Path]) -> None:
        """
        Merge a JSON configuration file over the defaults.

        Args:
            config_file: Path to configuration file
        """
        path = Path(config_file)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                config = json.load(f)
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
        for key, value in config.items():
            if key not in self.settings:
                raise UsageError(f"unknown config key '{key}' in {path}")
            if isinstance(self.settings[key], dict):
                if not isinstance(value, dict):
                    raise UsageError(f"config section '{key}' must be an object")
                self.override(key, **value)
            else:
                self.settings[key] = value

    def override(self, section: Optional[str] = None, **values: Any) -> "RunConfig":
        """Apply explicit values; None means "not given" and is skipped."""
        target = self.settings if section is None else self.settings[section]
        for key, value in values.items():
            if value is None:
                continue
            if key not in target:
                raise UsageError(f"unknown setting '{key}'" + (f" in section '{section}'" if section else ""))
            target[key] = value
        return self

    def __getitem__(self, key: str) -> Any:
        return self.settings[key]

    @property
    def seed(self) -> int:
        return self.resolve_seed()

    def resolve_seed(self) -> int:
        """Draw and record a seed when none was given."""
        if self.settings["seed"] is None:
            self.settings["seed"] = int(np.random.SeedSequence().entropy % (2 ** 32))
        return int(self.settings["seed"])

    def em_config(self, progress: bool = False) -> EMConfig:
        return EMConfig(**self.settings["em"], seed=self.seed, progress=progress)

    def mom_config(self) -> MoMConfig:
        return MoMConfig(**self.settings["mom"], seed=self.seed)

    def hidden_em_config(self, progress: bool = False) -> HiddenEMConfig:
        return HiddenEMConfig(**self.settings["hidden_em"], seed=self.seed, progress=progress)

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.settings)

    def save(self, path: Union[str, Path]) -> Path:
        self.resolve_seed()
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
        return path
