"""Run configuration: every module config plus seed, inputs and output directory.

The JSON document mirrors the dataclasses section by section. Unknown keys
and wrongly typed values are rejected before any work starts.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .actions import ActionDistanceConfig
from .agent import PlannerConfig
from .causal import EngineConfig, ExtractionConfig
from .reward import OutcomeDistanceConfig, RewardConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConvoyConfig:
    gap_max: float = 50.0
    window: float = 5.0
    max_independent: int | None = None

    def __post_init__(self):
        if self.gap_max <= 0 or self.window <= 0:
            raise ValueError("gap_max and window must be positive")


SECTIONS = {
    "reward": RewardConfig,
    "distance": OutcomeDistanceConfig,
    "action": ActionDistanceConfig,
    "planner": PlannerConfig,
    "extraction": ExtractionConfig,
    "convoy": ConvoyConfig,
}


@dataclass(frozen=True)
class RunConfig:
    reward: RewardConfig = RewardConfig()
    distance: OutcomeDistanceConfig = OutcomeDistanceConfig()
    action: ActionDistanceConfig = ActionDistanceConfig()
    planner: PlannerConfig = PlannerConfig()
    extraction: ExtractionConfig = ExtractionConfig()
    convoy: ConvoyConfig = ConvoyConfig()
    seed: int = 0
    inputs: tuple[str, ...] = ()
    output_dir: str | None = None

    @property
    def engine(self) -> EngineConfig:
        return EngineConfig(self.reward, self.distance, self.action, self.planner,
                            self.extraction, self.seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["inputs"] = list(self.inputs)
        return d


def _coerce(value: Any, default: Any, where: str):
    """Check a JSON value against the type of the field's default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return type(default)(value) if isinstance(default, float) or float(value).is_integer() \
            else value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return tuple(value)
    return value


def _section(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    base = cls()
    kwargs = {}
    for k, v in data.items():
        default = getattr(base, k)
        if default is None:
            if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
                raise ConfigError(f"{where}.{k}: expected an integer or null")
            kwargs[k] = v
        else:
            kwargs[k] = _coerce(v, default, f"{where}.{k}")
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{where}: {e}") from e


def config_from_dict(data: Any, base: RunConfig = RunConfig()) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    allowed = set(SECTIONS) | {"seed", "inputs", "output_dir"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"config: unknown key(s) {', '.join(unknown)}")
    updates = {}
    for name, cls in SECTIONS.items():
        if name in data:
            merged = {**dataclasses.asdict(getattr(base, name)), **data[name]} \
                if isinstance(data[name], dict) else data[name]
            updates[name] = _section(cls, merged, name)
    if "seed" in data:
        if isinstance(data["seed"], bool) or not isinstance(data["seed"], int) or data["seed"] < 0:
            raise ConfigError("seed: expected a non-negative integer")
        updates["seed"] = data["seed"]
    if "inputs" in data:
        if not isinstance(data["inputs"], list) or not all(isinstance(p, str)
                                                           for p in data["inputs"]):
            raise ConfigError("inputs: expected a list of paths")
        updates["inputs"] = tuple(data["inputs"])
    if "output_dir" in data:
        if data["output_dir"] is not None and not isinstance(data["output_dir"], str):
            raise ConfigError("output_dir: expected a path")
        updates["output_dir"] = data["output_dir"]
    return replace(base, **updates)


def load_config(path: str | Path | None, base: RunConfig = RunConfig()) -> RunConfig:
    if path is None:
        return base
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from e
    return config_from_dict(data, base)
