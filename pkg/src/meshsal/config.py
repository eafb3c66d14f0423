"""Config files, config hashing, and run manifests.

Config files use INI key = value grammar with one section per subsystem::

    [model]
    input_mode = geometry
    n_centers = 128
    subgraph_len = 32
    d_tok = 192
    ...

    [train]
    lr = 1e-3
    epochs = 150
    ...

    [gaze]
    velocity_threshold_deg = 30
    aperture_deg = 1.0
    ...

Keys are the dataclass field names of ModelConfig, TrainConfig and GazeParams;
unknown keys are an error.  Command-line flags override file values.

Every CLI run writes ``<output>.manifest.json`` beside its primary output,
recording the command, arguments, seed, config hash, and library versions.
Manifests contain no timestamps, so reruns with the same seed are
byte-identical.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .gaze import GazeParams
from .model import ModelConfig
from .train import TrainConfig


def _coerce(value: str, target_type) -> object:
    if target_type is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    if target_type == float | None or str(target_type) in ("float | None", "typing.Optional[float]"):
        return None if value.strip().lower() in ("none", "") else float(value)
    return value


def _apply_section(instance, section: configparser.SectionProxy, section_name: str):
    by_name = {f.name: f for f in fields(instance)}
    for key, raw in section.items():
        if key not in by_name:
            raise ConfigError(f"unknown key {key!r} in [{section_name}]")
        ftype = by_name[key].type
        if isinstance(ftype, str):
            ftype = {"bool": bool, "int": int, "float": float, "str": str,
                     "float | None": float | None}.get(ftype, str)
        setattr(instance, key, _coerce(raw, ftype))
    return instance


def load_config(path: str | Path | None) -> dict:
    """Parse an INI config into fresh dataclass instances (defaults if absent)."""
    model = ModelConfig()
    train = TrainConfig()
    gaze = GazeParams()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(Path(path))
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for name, instance in (("model", model), ("train", train), ("gaze", gaze)):
            if parser.has_section(name):
                _apply_section(instance, parser[name], name)
        known = {"model", "train", "gaze"}
        extra = set(parser.sections()) - known
        if extra:
            raise ConfigError(f"unknown config sections: {sorted(extra)}")
    return {"model": model, "train": train, "gaze": gaze}


def config_hash(payload: dict) -> str:
    """Stable hash of any JSON-serializable configuration payload."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def write_manifest(output_path: str | Path, command: str, args: dict, seed: int, payload: dict) -> Path:
    """Write ``<output>.manifest.json`` next to a primary output, deterministically."""
    import meshsal

    manifest = {
        "command": command,
        "args": {k: str(v) for k, v in sorted(args.items())},
        "seed": seed,
        "config_hash": config_hash(payload),
        "versions": {
            "meshsal": meshsal.__version__,
            "numpy": np.__version__,
        },
    }
    path = Path(str(output_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path
