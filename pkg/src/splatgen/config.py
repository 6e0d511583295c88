"""Training configuration: flat key-value config file, presets, schedules.

The config file is flat YAML (key: value, no nesting).  Every key is also
a CLI flag (dashes for underscores); flags win over the file, the file
wins over the preset.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError


@dataclass(frozen=True)
class TrainConfig:
    preset: str = "desk"
    seed: int = 0
    data_dir: str = "data"
    out_dir: str = "runs/desk"

    # dataset
    n_objects: int = 8
    n_holdout: int = 2
    disk_views: int = 20

    # model
    coarse_n: int = 256
    sr_factor: int = 4
    dim: int = 256
    heads: int = 4
    encoder_blocks: int = 4
    geometry_blocks: int = 2
    texture_blocks: int = 2
    patch_size: int = 8
    plane_res: int = 32
    plane_feat: int = 16
    plane_patch: int = 4
    decode_hidden: int = 64
    sr_width: int = 32
    sr_grid: int = 16
    texture_field: bool = True

    # resolutions and views
    input_res: int = 64
    render_res: int = 64
    views_per_iter: int = 8
    radius: float = 2.2
    elevation_min: float = -10.0
    elevation_max: float = 50.0

    # stages
    epochs_coarse: int = 160
    epochs_sr: int = 25
    epochs_joint: int = 15
    lr_coarse: float = 3e-4
    lr_sr: float = 3e-4
    lr_joint: float = 5e-5
    lr_warmup_epochs: int = 4

    # losses
    omega1: float = 2.0
    chamfer_start: float = 2.0
    chamfer_end: float = 0.2
    render_start: float = 1.0
    render_end: float = 10.0
    chamfer_w1: float = 1.0
    chamfer_w2: float = 1.0

    # pseudo labels
    label_iters: int = 300
    label_lr: float = 0.02
    label_views: int = 8  # fit on this many pool views; 0 = all

    # logging
    log_psnr_every: int = 25

    def __post_init__(self):
        positive = ("n_objects", "coarse_n", "sr_factor", "dim", "heads", "input_res",
                    "render_res", "views_per_iter", "epochs_coarse", "epochs_sr",
                    "epochs_joint", "lr_coarse", "lr_sr", "lr_joint", "label_iters",
                    "radius", "disk_views")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr_warmup_epochs > self.epochs_coarse:
            raise ConfigError("lr_warmup_epochs cannot exceed epochs_coarse")
        if self.elevation_min > self.elevation_max:
            raise ConfigError("elevation_min must be <= elevation_max")


PAPER_OVERRIDES = dict(
    preset="paper",
    coarse_n=4096,
    sr_factor=4,
    input_res=256,
    render_res=128,
    epochs_coarse=10,
    epochs_sr=5,
    epochs_joint=3,
    lr_coarse=1e-4,
    lr_sr=1e-4,
    lr_joint=1e-5,
    sr_grid=32,
    n_objects=64,
)


def preset_config(name: str) -> TrainConfig:
    if name == "desk":
        return TrainConfig()
    if name == "paper":
        return TrainConfig(**PAPER_OVERRIDES)
    raise ConfigError(f"unknown preset {name!r} (expected 'desk' or 'paper')")


_FIELDS = {f.name: f for f in fields(TrainConfig)}


def _coerce(name: str, value):
    f = _FIELDS[name]
    try:
        if f.type in ("int", int):
            return int(value)
        if f.type in ("float", float):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {name!r}: cannot parse {value!r} as {f.type}")
    if f.type in ("bool", bool):
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return bool(value)
    return str(value)


def load_config(path=None, overrides: dict | None = None) -> TrainConfig:
    """preset <- config file <- overrides, unknown keys rejected."""
    file_map = {}
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config file must be a flat mapping, got {type(raw).__name__}")
        file_map = raw
    merged = dict(file_map)
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = v
    preset = merged.pop("preset", file_map.get("preset", "desk"))
    cfg = preset_config(str(preset))
    unknown = [k for k in merged if k not in _FIELDS]
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return replace(cfg, **{k: _coerce(k, v) for k, v in merged.items()})


def save_config(cfg: TrainConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(asdict(cfg), sort_keys=True))


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


# -- schedules ----------------------------------------------------------------

def stage1_lr(cfg: TrainConfig, epoch: int) -> float:
    """Linear warmup to lr_coarse over lr_warmup_epochs, then cosine anneal
    to 25% of peak by the final epoch.

    The floor stays high on purpose: the render weight only dominates late
    in the stage, so the last epochs still need usable step sizes.
    """
    w = cfg.lr_warmup_epochs
    if epoch < w:
        return cfg.lr_coarse * (epoch + 1) / w
    span = max(cfg.epochs_coarse - w, 1)
    t = (epoch - w) / span
    floor = 0.25 * cfg.lr_coarse
    return floor + (cfg.lr_coarse - floor) * 0.5 * (1.0 + np.cos(np.pi * t))


def stage1_weights(cfg: TrainConfig, epoch: int) -> tuple[float, float]:
    """(chamfer, render) weights: hold the start pair through warmup, then
    ramp linearly, hitting the end pair exactly at the final epoch."""
    last = cfg.epochs_coarse - 1
    if last <= 0:
        return cfg.chamfer_start, cfg.render_start
    if epoch >= last:
        return cfg.chamfer_end, cfg.render_end
    w = min(cfg.lr_warmup_epochs, last - 1)
    if epoch <= w:
        return cfg.chamfer_start, cfg.render_start
    t = (epoch - w) / (last - w)
    return (
        cfg.chamfer_start + (cfg.chamfer_end - cfg.chamfer_start) * t,
        cfg.render_start + (cfg.render_end - cfg.render_start) * t,
    )
