from __future__ import annotations

from dataclasses import dataclass

from src.pipeline.errors import ConfigError

VALUE_RANGE = (-1.0, 1.0)
MAX_CLASSES = 4  # disk, square, cross, horizontal stripes


@dataclass(frozen=True)
class DataConfig:
    grid: int = 4          # tokens per side G
    patch: int = 4         # pixels per token side P
    n_classes: int = 4     # first n shapes of the registry order
    n_images: int = 4096
    seed: int = 0

    def __post_init__(self) -> None:
        if self.grid < 2 or self.patch < 2:
            raise ConfigError(f"data.grid and data.patch must be >= 2, got {self.grid} and {self.patch}")
        if not 1 <= self.n_classes <= MAX_CLASSES:
            raise ConfigError(f"data.n_classes must lie in [1, {MAX_CLASSES}], got {self.n_classes}")
        if self.n_images < 1:
            raise ConfigError(f"data.n_images must be >= 1, got {self.n_images}")
        if self.seed < 0:
            raise ConfigError(f"data.seed must be unsigned, got {self.seed}")

    @property
    def side(self) -> int:
        return self.grid * self.patch

    @property
    def n_tokens(self) -> int:
        return self.grid * self.grid

    @property
    def d_patch(self) -> int:
        return self.patch * self.patch
