"""
Experiment configuration: strict JSON with sections data, model, loss, optim, train.

Missing keys fall back to the dataclass defaults; unknown keys at any level are
rejected. ``to_dict`` and ``from_dict`` are exact inverses.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Union

from src.align.features import LossWeights
from src.nets.config import StudentConfig
from src.pipeline.errors import ConfigError
from src.pipeline.utils import ensure_dir
from src.synth.config import DataConfig

logger = logging.getLogger(__name__)

SECTIONS = ("data", "model", "loss", "optim", "train")
DERIVED_MODEL_KEYS = ("n_tokens", "d_latent", "n_classes")


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.0   # decoupled; applied multiplicatively before the update
    eps: float = 1e-8
    ema_decay: float = 0.9999   # student shadow weights

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"optim.learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2", "ema_decay"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"optim.{name} must lie in [0, 1], got {value}")
        if self.weight_decay < 0 or self.eps <= 0:
            raise ConfigError("optim.weight_decay must be >= 0 and optim.eps > 0")


@dataclass(frozen=True)
class TrainSection:
    batch_size: int = 64
    total_steps: int = 2000
    label_dropout: float = 0.1      # probability of replacing a label by the null id
    seed: int = 0                   # init + data order + noise + time + dropout
    log_every: int = 50
    checkpoint_every: int = 500     # 0 disables intermediate checkpoints
    out_dir: str = "runs/default"
    workers: int = 1                # threads for dataset rendering
    record_wallclock: bool = False  # when false wallclock_ms is written as 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.total_steps < 0:
            raise ConfigError("train.batch_size must be >= 1 and train.total_steps >= 0")
        if not 0.0 <= self.label_dropout <= 1.0:
            raise ConfigError(f"train.label_dropout must lie in [0, 1], got {self.label_dropout}")
        if self.seed < 0 or self.log_every < 1 or self.checkpoint_every < 0 or self.workers < 1:
            raise ConfigError("train.seed >= 0, log_every >= 1, checkpoint_every >= 0 and workers >= 1 are required")


@dataclass(frozen=True)
class TrainConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: StudentConfig = field(default_factory=StudentConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    optim: OptimConfig = field(default_factory=OptimConfig)
    train: TrainSection = field(default_factory=TrainSection)

    # ============================================================
    # Parsing
    # ============================================================

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "TrainConfig":
        if not isinstance(raw, Mapping):
            raise ConfigError(f"Config must be a JSON object, got {type(raw).__name__}")
        unknown = sorted(set(raw) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Unknown top-level config key(s): {unknown}. Allowed: {list(SECTIONS)}")

        data = _build(DataConfig, raw.get("data"), "data")
        model_raw = _strict_section(StudentConfig, raw.get("model"), "model", exclude=DERIVED_MODEL_KEYS)
        model = _build(
            StudentConfig,
            dict(model_raw, n_tokens=data.n_tokens, d_latent=data.d_patch, n_classes=data.n_classes),
            "model",
        )
        return cls(
            data=data,
            model=model,
            loss=_build(LossWeights, raw.get("loss"), "loss"),
            optim=_build(OptimConfig, raw.get("optim"), "optim"),
            train=_build(TrainSection, raw.get("train"), "train"),
        )

    def to_dict(self) -> Dict[str, Any]:
        model = {k: v for k, v in asdict(self.model).items() if k not in DERIVED_MODEL_KEYS}
        return {
            "data": asdict(self.data),
            "model": model,
            "loss": asdict(self.loss),
            "optim": asdict(self.optim),
            "train": asdict(self.train),
        }

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TrainConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as err:
            raise ConfigError(f"Config file not found: {path}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"Config {path} is not valid JSON: {err}") from err
        try:
            return cls.from_dict(raw)
        except ConfigError as err:
            raise ConfigError(f"{path}: {err}") from err

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        ensure_dir(path.parent)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _strict_section(cls, raw, name: str, exclude=()) -> Dict[str, Any]:
    if raw is None:
        return {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"Config section '{name}' must be an object, got {type(raw).__name__}")
    allowed = {f.name for f in fields(cls)} - set(exclude)
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"Unknown key(s) in '{name}': {unknown}. Allowed: {sorted(allowed)}")
    return dict(raw)


def _coerce(cls, values: Dict[str, Any], name: str) -> Dict[str, Any]:
    defaults = {f.name: f.default for f in fields(cls)}
    out: Dict[str, Any] = {}
    for key, value in values.items():
        # a None default marks a float filled in by __post_init__
        expected = float if defaults[key] is None else type(defaults[key])
        if expected is bool:
            ok = isinstance(value, bool)
        elif expected is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        elif expected is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            value = float(value) if ok else value
        else:
            ok = isinstance(value, expected)
        if not ok:
            raise ConfigError(f"{name}.{key} must be {expected.__name__}, got {value!r}")
        out[key] = value
    return out


def _build(cls, raw, name: str):
    values = _strict_section(cls, raw, name)
    return cls(**_coerce(cls, values, name))
