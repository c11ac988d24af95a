"""Experiment configuration: one JSON document with a section per component.

    {"reward": {"lambda_count": 0.2, ..., "sigma": 0.5, "format_penalty": 0.0},
     "filter": {"min_std": 0.1, "min_max": 0.8, "median_low": 0.08, "median_high": 0.6},
     "clip": {"eps_low": 0.15, "eps_high": 0.25},
     "iou_threshold": 0.5,
     "strict_io": true,
     "split_fraction": 0.5}

Keys may also be given flat at the top level; absent keys keep their defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

from .grpo import ClipConfig, FilterThresholds
from .rewards import RewardConfig

_SECTIONS = {"reward": RewardConfig, "filter": FilterThresholds, "clip": ClipConfig}
_SCALARS = ("iou_threshold", "strict_io", "split_fraction")


@dataclass(frozen=True)
class CliConfig:
    reward: RewardConfig = field(default_factory=RewardConfig)
    filter: FilterThresholds = field(default_factory=FilterThresholds)
    clip: ClipConfig = field(default_factory=ClipConfig)
    iou_threshold: float = 0.5
    strict_io: bool = True
    split_fraction: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.iou_threshold <= 1:
            raise ValueError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if not 0 < self.split_fraction < 1:
            raise ValueError(f"split_fraction must be in (0, 1), got {self.split_fraction}")

    def with_overrides(self, **kw) -> CliConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def config_from_dict(d: dict) -> CliConfig:
    if not isinstance(d, dict):
        raise ValueError("config must be a JSON object")
    owners = {f.name: sec for sec, cls in _SECTIONS.items() for f in fields(cls)}
    sections: dict[str, dict] = {sec: {} for sec in _SECTIONS}
    scalars = {}
    for key, value in d.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ValueError(f"config section {key!r} must be an object")
            sections[key].update(value)
        elif key in owners:
            sections[owners[key]][key] = value
        elif key in _SCALARS:
            scalars[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    return CliConfig(
        reward=RewardConfig.from_dict(sections["reward"]),
        filter=FilterThresholds.from_dict(sections["filter"]),
        clip=ClipConfig.from_dict(sections["clip"]),
        **scalars,
    )


def load_config(path) -> CliConfig:
    with open(path, encoding="utf-8") as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON: {e}") from e
    try:
        return config_from_dict(d)
    except (TypeError, ValueError) as e:
        raise ValueError(f"{path}: {e}") from e
