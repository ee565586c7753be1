"""Training configuration and the flat ``key = value`` config file format.

The same dataclass drives the trainer, the config-file parser and the CLI
flags, so defaults live in exactly one place.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .discriminator import DiscriminatorConfig
from .errors import TrainError
from .generator import GeneratorConfig
from .losses import LossWeights

CKPT_DIR_ENV = "RETARGET_CKPT_DIR"


@dataclass
class TrainConfig:
    # optimisation
    lr_generator: float = 0.001
    lr_discriminator: float = 0.0001
    batch_size: int = 6
    epochs: int = 40
    canvas: int = 512
    seed: int = 0
    checkpoint_every: int = 1000
    # loss weights
    kappa: float = 10.0
    alpha: float = 30.0
    beta: float = 100.0
    gamma: float = 0.001
    loss_region: str = "full"          # "full" padded canvas or "valid" region only
    backbone: str = "dilated"
    # data
    dataset_root: str = ""
    provider: str = "files"
    shift_prob: float = 0.5  # chance of jittering the training mask placement
    workers: int = 0
    # generator
    base_width: int = 64
    max_width: int = 256
    n_residual: int = 9
    global_ratio: float = 0.75
    # discriminator
    disc_layers: int = 4
    disc_width: int = 64
    # io
    out_dir: str = ""
    deterministic: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise TrainError("learning rates must be positive")
        if self.batch_size < 1 or self.epochs < 1 or self.checkpoint_every < 1:
            raise TrainError("batch_size, epochs and checkpoint_every must be >= 1")
        if self.canvas % 8:
            raise TrainError(f"canvas {self.canvas} must be divisible by 8")
        if self.loss_region not in ("full", "valid"):
            raise TrainError(f"loss_region must be 'full' or 'valid', got {self.loss_region!r}")
        self.weights  # validates

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.kappa, self.alpha, self.beta, self.gamma)

    @property
    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(base_width=self.base_width, max_width=self.max_width,
                               n_residual=self.n_residual, global_ratio=self.global_ratio)

    @property
    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(n_layers=self.disc_layers, base_width=self.disc_width)

    @property
    def checkpoint_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get(CKPT_DIR_ENV, "checkpoints"))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise TrainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: coerce(k, v) for k, v in values.items()})


def field_types() -> dict[str, type]:
    return {f.name: type(f.default) for f in fields(TrainConfig)}


def coerce(key: str, value: Any) -> Any:
    kind = field_types()[key]
    if not isinstance(value, str) or kind is str:
        return kind(value)
    if kind is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise TrainError(f"{key}: expected a boolean, got {value!r}")
    try:
        return kind(value)
    except ValueError:
        raise TrainError(f"{key}: expected {kind.__name__}, got {value!r}") from None


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise TrainError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split(sep, 1))
        values[key] = value
    return values


def load_config(path: str | os.PathLike | None = None, **overrides) -> TrainConfig:
    values: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise TrainError(f"config file {p} not found")
        values.update(parse_config_text(p.read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_dict(values)


def dump_config(cfg: TrainConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in cfg.to_dict().items())
