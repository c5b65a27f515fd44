"""Pipeline configuration: one JSON file, strictly validated.

Unknown keys are rejected everywhere (typo safety).  The ``root`` is the
declared workspace root all relative paths resolve against; the
``TREELOOP_ROOT`` environment variable overrides it.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

from .filters import FilterConfig
from .gafit import GaConfig
from .loop import LoopConfig
from .repair import RepairConfig

__all__ = ["ConfigError", "MetricOptions", "PipelineConfig", "load_pipeline_config", "config_to_json_dict"]

ROOT_ENV = "TREELOOP_ROOT"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MetricOptions:
    bf1_tolerance: float = 2.0


@dataclass(frozen=True)
class PipelineConfig:
    root: str = "."
    logging_level: str = "INFO"
    filter: FilterConfig = FilterConfig()
    ga: GaConfig = GaConfig()
    repair: RepairConfig = RepairConfig()
    metrics: MetricOptions = MetricOptions()
    loop: LoopConfig | None = None


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {k: _tuplify(v) for k, v in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_SECTIONS = {
    "filter": FilterConfig,
    "ga": GaConfig,
    "repair": RepairConfig,
    "metrics": MetricOptions,
    "loop": LoopConfig,
}


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    """Parse and validate a pipeline config file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path}: top level must be an object")

    allowed = {"root", "logging_level", *_SECTIONS}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"config {path}: unknown keys {sorted(unknown)}")

    kwargs: dict = {}
    if "root" in raw:
        kwargs["root"] = str(raw["root"])
    if "logging_level" in raw:
        kwargs["logging_level"] = str(raw["logging_level"])
    for name, cls in _SECTIONS.items():
        if name in raw:
            kwargs[name] = _build(cls, raw[name], f"config {path}: section '{name}'")
    cfg = PipelineConfig(**kwargs)

    env_root = os.environ.get(ROOT_ENV)
    if env_root:
        cfg = dataclasses.replace(cfg, root=env_root)

    try:
        cfg.filter.validate()
        cfg.ga.validate()
        cfg.repair.validate()
        if cfg.loop is not None:
            cfg.loop.validate()
    except ValueError as exc:
        raise ConfigError(f"config {path}: {exc}") from exc
    return cfg


def config_to_json_dict(cfg: PipelineConfig) -> dict:
    """Dataclass config -> plain JSON-ready dict (tuples become lists)."""
    out = dataclasses.asdict(cfg)
    if out.get("loop") is None:
        out.pop("loop", None)
    return out
