"""Pipeline configuration: one JSON document that fully determines a run.

Defaults describe a small synthetic end-to-end campaign; a config file
overrides defaults section by section, and command-line flags override
the file. The merged document is serialized next to every output so any
artifact can be traced back to the exact settings that produced it.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from .bands import RESOLUTION_LABEL
from .errors import NotFoundError, ValidationError
from .grid import AUSTRALIA_BBOX, GeoGrid, ResolutionClass, make_grid
from .loss import LossSpec
from .resample import ResampleParams
from .segnet import SegNetConfig
from .synth import ObservationMode, SensorModel
from .train import TrainConfig

RESOLUTION_BY_LABEL = {v: k for k, v in RESOLUTION_LABEL.items()}

DEFAULTS = {
    "seed": 0,
    "paths": {
        "swaths": "swaths",
        "store": "store",
        "out": "out",
    },
    "grid": {
        "bbox": list(AUSTRALIA_BBOX),
        "cell_deg": 0.75,
    },
    "synth": {
        "days": 12,
        "cells": 2,
        "p_spread": 0.3,
        "wind": [0.0, 0.0],
        "burn_days": 4,
        "sensors": [
            {
                "name": "coh",
                "mode": "coherent",
                "resolution": "750m",
                "false_alarm_prob": 0.0,
                "jitter_px": 0.0,
            },
            {
                "name": "sto",
                "mode": "stochastic",
                "resolution": "1km",
                "detect_prob": 0.5,
                "false_alarm_prob": 0.002,
                "jitter_px": 0.0,
            },
        ],
    },
    "resample": {
        "k_neighbors": 4,
        "power": 2.0,
        "radius_px": 2.0,
    },
    "dataset": {
        "fire_products": ["coh-fire", "sto-fire"],
        "target_product": "coh-fire",
        "manifest": "proxy:coh:750m",
        "val_fraction": 0.25,
        "date_range": None,
    },
    "loss": {
        "w": 3.0,
        "eps": 1e-7,
    },
    "net": {
        "levels": 3,
        "base_width": 8,
        "head_pool": 3,
    },
    "train": {
        "learning_rate": 0.01,
        "momentum": 0.9,
        "batch_size": 8,
        "max_epochs": 20,
    },
    "tracker": {
        "max_gap_days": 2,
    },
}

CONFIG_FILENAME = "config.json"


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ValidationError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ValidationError(f"config key {where!r} must be a section")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class PipelineConfig:
    """Merged configuration document plus typed accessors."""

    data: dict

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def path(self, name: str) -> Path:
        return Path(self.data["paths"][name])

    def grid(self) -> GeoGrid:
        section = self.data["grid"]
        lon0, lat0, lon1, lat1 = section["bbox"]
        return make_grid(lon0, lat0, lon1, lat1, float(section["cell_deg"]))

    def resample_params(self) -> ResampleParams:
        s = self.data["resample"]
        return ResampleParams(
            k_neighbors=int(s["k_neighbors"]),
            power=float(s["power"]),
            radius_px=float(s["radius_px"]),
        )

    def loss_spec(self) -> LossSpec:
        s = self.data["loss"]
        return LossSpec(w=float(s["w"]), eps=float(s["eps"]))

    def train_config(self) -> TrainConfig:
        s = self.data["train"]
        return TrainConfig(
            learning_rate=float(s["learning_rate"]),
            momentum=float(s["momentum"]),
            batch_size=int(s["batch_size"]),
            max_epochs=int(s["max_epochs"]),
            seed=self.seed,
        )

    def net_config(self, in_channels: int) -> SegNetConfig:
        s = self.data["net"]
        return SegNetConfig(
            in_channels=in_channels,
            levels=int(s["levels"]),
            base_width=int(s["base_width"]),
            head_pool=int(s["head_pool"]),
            seed=self.seed,
        )

    def sensor_models(self) -> list[SensorModel]:
        models = []
        for s in self.data["synth"]["sensors"]:
            label = s["resolution"]
            if label not in RESOLUTION_BY_LABEL:
                raise ValidationError(f"unknown resolution label {label!r}")
            models.append(
                SensorModel(
                    name=s["name"],
                    mode=ObservationMode(s["mode"]),
                    resolution=RESOLUTION_BY_LABEL[label],
                    detect_prob=s.get("detect_prob"),
                    false_alarm_prob=float(s.get("false_alarm_prob", 0.0)),
                    jitter_px=float(s.get("jitter_px", 0.0)),
                )
            )
        return models

    def resolution(self, label: str) -> ResolutionClass:
        if label not in RESOLUTION_BY_LABEL:
            raise ValidationError(f"unknown resolution label {label!r}")
        return RESOLUTION_BY_LABEL[label]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Defaults, overlaid by an optional file, overlaid by flag values."""
    merged = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except FileNotFoundError:
            raise NotFoundError(f"{path}: no such config file") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        merged = _merge(merged, doc)
    if overrides:
        merged = _merge(merged, overrides)
    return PipelineConfig(merged)


def write_provenance(cfg: PipelineConfig, out_dir) -> Path:
    """Record the exact configuration next to the artifacts it produced."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / CONFIG_FILENAME
    path.write_text(cfg.to_json())
    return path
