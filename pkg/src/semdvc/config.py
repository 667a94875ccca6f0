"""Flat run configuration: dotted keys, strict validation, CLI overrides."""

import json
import os
from pathlib import Path

# key -> (default, type, help)
CONFIG_SCHEMA = {
    "seed": (42, int, "global RNG seed (env DVC_SEED overrides)"),
    "resize.length": (1024, int, "sequence length after temporal resampling"),
    "pyramid.levels": (3, int, "number of stride-2 pyramid levels above the raw one"),
    "model.dim": (256, int, "model feature dimension"),
    "fusion.mode": ("late", str, "multi-stream fusion mode: early | late"),
    "attention.heads": (8, int, "deformable attention heads"),
    "attention.points": (4, int, "sampling points per head per level"),
    "encoder.layers": (2, int, "encoder layers"),
    "decoder.layers": (2, int, "decoder layers"),
    "queries.count": (35, int, "number of event queries"),
    "counter.maxEvents": (10, int, "expected max event count (counter has maxEvents+1 classes)"),
    "labels.size": (25, int, "label space size"),
    "caption.maxLen": (20, int, "max caption length including the end token"),
    "caption.wordDim": (128, int, "caption word embedding dimension"),
    "caption.hiddenDim": (256, int, "caption recurrent hidden dimension"),
    "vocab.minFreq": (1, int, "min corpus frequency for text vocabulary tokens"),
    "concepts.enabled": (True, bool, "use the concept stream"),
    "concepts.count": (100, int, "concept vocabulary size"),
    "concepts.hidden": (256, int, "concept detector hidden width"),
    "concepts.modality": (0, int, "modality index feeding the concept detector"),
    "concepts.epochs": (50, int, "concept detector training epochs"),
    "concepts.lr": (1e-3, float, "concept detector learning rate"),
    "focal.gamma": (2.0, float, "focal loss gamma"),
    "focal.alpha": (0.25, float, "focal loss alpha"),
    "loss.captionWeight": (1.0, float, "caption loss weight"),
    "loss.locWeight": (2.0, float, "localization loss weight"),
    "loss.clsWeight": (1.0, float, "classification loss weight (0 disables the head's supervision)"),
    "loss.counterWeight": (0.5, float, "counter loss weight"),
    "match.locWeight": (2.0, float, "localization term weight in the matching cost"),
    "match.clsWeight": (1.0, float, "classification term weight in the matching cost"),
    "train.epochs": (50, int, "model training epochs"),
    "train.lr": (1e-4, float, "model learning rate"),
}


class ConfigError(ValueError):
    """Raised on unknown keys or uncoercible values."""


def _coerce(key: str, value, target_type):
    if target_type is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "1", "yes", "on"):
            return True
        if isinstance(value, str) and value.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: cannot interpret {value!r} as a boolean")
    try:
        return target_type(value)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{key}: {err}") from err


class RunConfig:
    """Validated flat configuration with defaults from CONFIG_SCHEMA."""

    def __init__(self, values: dict | None = None):
        self._values = {}
        self._explicit = set()
        if values:
            self.update(values)

    def update(self, values: dict) -> None:
        problems = [f"unknown config key: {k}" for k in sorted(values) if k not in CONFIG_SCHEMA]
        for key, value in values.items():
            if key not in CONFIG_SCHEMA:
                continue
            try:
                self._values[key] = _coerce(key, value, CONFIG_SCHEMA[key][1])
                self._explicit.add(key)
            except ConfigError as err:
                problems.append(str(err))
        if problems:
            raise ConfigError("; ".join(problems))

    def __getitem__(self, key: str):
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        return self._values.get(key, CONFIG_SCHEMA[key][0])

    def is_explicit(self, key: str) -> bool:
        return key in self._explicit

    def resolved(self) -> dict:
        return {key: self[key] for key in CONFIG_SCHEMA}

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        """Build from an optional JSON file plus override pairs; the
        DVC_SEED environment variable takes final precedence for the seed."""
        cfg = cls()
        if path is not None:
            with open(Path(path)) as f:
                cfg.update(json.load(f))
        if overrides:
            cfg.update(overrides)
        env_seed = os.environ.get("DVC_SEED")
        if env_seed is not None:
            cfg.update({"seed": env_seed})
        return cfg

    def snapshot(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.resolved(), f, indent=2, sort_keys=True)


def defaults_help() -> str:
    lines = []
    for key, (default, _, text) in sorted(CONFIG_SCHEMA.items()):
        lines.append(f"  {key} = {default!r}: {text}")
    return "\n".join(lines)
