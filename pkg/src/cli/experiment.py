# src/cli/experiment.py
"""
Experiment configuration
Defaults from config/settings.py, deep-merged with a TOML file (from
--config or $AASV_CONFIG), then --set section.key=value overrides and
dedicated flags. The merged result is validated against a JSON schema.
"""

import copy
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import jsonschema
import numpy as np
import psutil

from config.logger import AASVLogger
from config.settings import CONFIG_ENV_VAR, default_sections
from src.errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = AASVLogger.get_logger(__name__)

_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_NUMBER = {"type": "number"}
_RANGE = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}
_TRAIN_SCHEMA = {
    "type": "object",
    "properties": {
        "epochs": _NONNEG_INT,
        "batch_size": _POS_INT,
        "crop_frames": _POS_INT,
        "base_lr": {"type": "number", "minimum": 0},
        "max_lr": {"type": "number", "minimum": 0},
        "cycle_steps": {"type": ["integer", "null"], "minimum": 1},
        "weight_decay": {"type": "number", "minimum": 0},
        "aam_scale": {"type": "number", "exclusiveMinimum": 0},
        "aam_margin": {"type": "number", "minimum": 0},
        "augment_prob": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["corpus", "features", "augment", "encoder", "train", "finetune", "domain",
                 "ratio", "eval", "pattern", "runtime", "paths"],
    "additionalProperties": False,
    "properties": {
        "corpus": {
            "type": "object",
            "properties": {
                "adult_speakers": {"type": "integer", "minimum": 4},
                "child_speakers": {"type": "integer", "minimum": 4},
                "utterances_per_speaker": {"type": "integer", "minimum": 2},
                "dc_utterances_per_speaker": _NONNEG_INT,
                "duration_s": {"type": "number", "minimum": 1},
                "sample_rate": {"const": 16000},
                "child_severity_range": _RANGE,
                "dc_severity_threshold": {"type": "number", "minimum": 0, "maximum": 1},
                "test_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "noise_floor_db_range": _RANGE,
                "virtual": {"type": "boolean"},
            },
        },
        "features": {"type": "object", "properties": {"n_mels": _POS_INT, "n_fft": _POS_INT}},
        "augment": {
            "type": "object",
            "properties": {
                "snr_db_range": _RANGE,
                "rir_decay_ms": {"type": "number", "exclusiveMinimum": 0},
                "freq_mask_max": _POS_INT,
                "time_mask_max": _POS_INT,
            },
        },
        "encoder": {
            "type": "object",
            "properties": {
                "input_dim": _POS_INT,
                "channels": _POS_INT,
                "kernel_sizes": {"type": "array", "items": _POS_INT, "minItems": 1},
                "dilations": {"type": "array", "items": _POS_INT, "minItems": 1},
                "bottleneck_channels": _POS_INT,
                "embedding_dim": _POS_INT,
            },
        },
        "train": _TRAIN_SCHEMA,
        "finetune": _TRAIN_SCHEMA,
        "domain": {"type": "object", "properties": {"hidden": _POS_INT, "epochs": _NONNEG_INT,
                                                    "batch_size": _POS_INT, "augmented_copies": _NONNEG_INT,
                                                    "class_balanced": {"type": "boolean"}}},
        "ratio": {"type": "object", "properties": {
            "adult_multipliers": {"type": "array", "items": _POS_INT, "minItems": 1},
            "child_count": _POS_INT}},
        "eval": {
            "type": "object",
            "properties": {
                "n_pos": _POS_INT,
                "n_neg": _POS_INT,
                "systems": {"type": "array", "items": {"enum": ["A-SV", "C-SV", "AASV", "w/o DC", "WSE"]}},
                "wse_alpha": {"type": "number", "minimum": 0, "maximum": 1},
                "excluded_cells": {"type": "array", "items": {"type": "string", "pattern": "^[^|]+\\|[^|]+$"}},
            },
        },
        "pattern": {"type": "object", "additionalProperties": _NUMBER},
        "runtime": {
            "type": "object",
            "required": ["seed"],
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "threads": {"type": ["integer", "null"], "minimum": 1},
                "max_threads": _POS_INT,
            },
        },
        "paths": {
            "type": "object",
            "required": ["corpus_dir", "checkpoints_dir", "report_dir"],
            "properties": {k: {"type": "string"} for k in ("corpus_dir", "checkpoints_dir", "report_dir")},
        },
    },
}


def deep_merge(base: dict, override: dict) -> dict:
    """Recursively merge override into a copy of base"""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(item: str) -> Dict[str, Any]:
    """'section.key=value' -> {section: {key: value}}; value parsed as JSON when possible"""
    if "=" not in item or "." not in item.split("=", 1)[0]:
        raise ConfigError(f"override '{item}' is not of the form section.key=value")
    dotted, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    keys = dotted.split(".")
    nested: Dict[str, Any] = value
    for key in reversed(keys):
        nested = {key: nested}
    return nested


def derive_seed(master: int, *keys: int) -> int:
    """Independent 32-bit seed for a sub-task of the run"""
    return int(np.random.SeedSequence(master, spawn_key=tuple(keys)).generate_state(1, dtype=np.uint32)[0])


@dataclass
class ExperimentConfig:
    sections: dict

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    @property
    def seed(self) -> int:
        return int(self.sections["runtime"]["seed"])

    @property
    def threads(self) -> int:
        runtime = self.sections["runtime"]
        if runtime.get("threads"):
            return int(runtime["threads"])
        cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
        return max(1, min(cores, int(runtime.get("max_threads", 8))))

    def path(self, name: str) -> Path:
        return Path(self.sections["paths"][name])

    def to_json(self) -> str:
        return json.dumps(self.sections, indent=2, sort_keys=True)

    def hash_of(self, payload: dict) -> str:
        """SHA-256 of the canonical JSON of payload"""
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def write_effective(self, directory: Path):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "effective_config.json").write_text(self.to_json() + "\n", encoding="utf-8")


def read_toml(path: Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc


def load_experiment_config(config_path: Optional[str] = None, overrides: Iterable[str] = (),
                           seed: Optional[int] = None, threads: Optional[int] = None,
                           paths: Optional[Dict[str, Optional[str]]] = None) -> ExperimentConfig:
    """
    Build the effective configuration; flags win over --set, which wins over the file

    Raises:
        ConfigError: unreadable file, malformed override or schema violation
    """
    sections = default_sections()
    config_path = config_path or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        sections = deep_merge(sections, read_toml(Path(config_path)))
        logger.info(f"Loaded config file {config_path}")
    for item in overrides:
        sections = deep_merge(sections, parse_override(item))
    if seed is not None:
        sections["runtime"]["seed"] = seed
    if threads is not None:
        sections["runtime"]["threads"] = threads
    for key, value in (paths or {}).items():
        if value is not None:
            sections["paths"][key] = str(value)

    try:
        jsonschema.validate(sections, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    return ExperimentConfig(sections)


def excluded_cells(cfg: ExperimentConfig) -> List[tuple]:
    return [tuple(item.split("|", 1)) for item in cfg["eval"].get("excluded_cells", [])]
