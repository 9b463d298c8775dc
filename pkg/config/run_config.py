# run_config.py - Fully resolved per-run configuration as sectioned key/value text

import configparser
import logging
import os
from dataclasses import dataclass, field, fields
from typing import Any

from models.model_config import ModelConfig
from models.scene import SynthConfig
from services.errors import ConfigurationError

logger = logging.getLogger(__name__)

RUN_CONFIG_NAME = "run_config.ini"


@dataclass
class RunSection:
    command: str = ""
    seed: int = 0
    n_samples: int = 200
    split_ratio: float = 0.8
    use_float_images: bool = True


@dataclass
class OptimConfig:
    epochs: int = 100
    batch_size: int = 4
    lr: float = 0.05
    weight_decay: float = 0.0004
    augment_flips: bool = True


@dataclass
class EvalConfig:
    threshold: float = 0.5
    match_dist: float = 3.0


SECTIONS = {
    "run": RunSection,
    "model": ModelConfig,
    "synth": SynthConfig,
    "optim": OptimConfig,
    "eval": EvalConfig,
}


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    model: ModelConfig = field(default_factory=ModelConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> None:
        self.model.validate()
        self.synth.validate()
        if self.optim.epochs < 0:
            raise ConfigurationError(f"epochs must be >= 0, got {self.optim.epochs}")
        if self.optim.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.optim.batch_size}")
        if self.optim.lr <= 0:
            raise ConfigurationError(f"lr must be > 0, got {self.optim.lr}")
        if self.optim.weight_decay < 0:
            raise ConfigurationError(f"weight_decay must be >= 0, got {self.optim.weight_decay}")
        if not 0.0 < self.run.split_ratio < 1.0:
            raise ConfigurationError(f"split_ratio must lie in (0, 1), got {self.run.split_ratio}")
        if not 0.0 < self.eval.threshold < 1.0:
            raise ConfigurationError(f"eval threshold must lie in (0, 1), got {self.eval.threshold}")
        if self.eval.match_dist < 0:
            raise ConfigurationError(f"match_dist must be >= 0, got {self.eval.match_dist}")

    def to_text(self) -> str:
        lines = []
        for section in SECTIONS:
            record = getattr(self, section)
            lines.append(f"[{section}]")
            for f in fields(record):
                lines.append(f"{f.name} = {format_value(getattr(record, f.name))}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigurationError(f"Malformed run config: {e}")
        config = cls()
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigurationError(f"Unknown config section [{section}]")
            record = getattr(config, section)
            known = {f.name for f in fields(record)}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigurationError(f"Unknown key {key!r} in section [{section}]")
                setattr(record, key, parse_value(raw, getattr(record, key), f"{section}.{key}"))
        return config


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(raw: str, default: Any, label: str) -> Any:
    """Parse raw text using the type of the field's default value"""
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return lowered in ("true", "1", "yes")
        if isinstance(default, tuple):
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            if default and len(parts) != len(default):
                raise ValueError(f"expected {len(default)} values")
            kinds = [type(d) for d in default] or [str] * len(parts)
            return tuple(parse_value(p, k(), label) for p, k in zip(parts, kinds))
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigurationError(f"Invalid value for {label}: {raw!r} ({e})")


def save_run_config(config: RunConfig, path: str) -> str:
    """Write the resolved config; a directory path gets run_config.ini inside it"""
    if os.path.isdir(path):
        path = os.path.join(path, RUN_CONFIG_NAME)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(config.to_text())
    logger.info(f"Resolved config written to {path}")
    return path


def load_run_config(path: str) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigurationError(f"Config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return RunConfig.from_text(f.read())
