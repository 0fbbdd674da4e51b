from __future__ import annotations

from dataclasses import dataclass

from src.pipeline.errors import ConfigError


@dataclass(frozen=True)
class StudentConfig:
    """
    Shape of the student denoiser, its projection head and the frozen teacher.

    ``n_tokens``, ``d_latent`` and ``n_classes`` are derived from the data
    section of an experiment config; the rest come from its model section.
    """

    depth: int = 4           # transformer blocks
    d_model: int = 64        # residual width
    heads: int = 4           # attention heads (must divide d_model)
    align_depth: int = 2     # block whose output is projected and aligned (1-based)
    mlp_ratio: int = 4       # feed-forward expansion
    time_freqs: int = 32     # sinusoidal frequencies of the time embedding
    d_teacher: int = 16      # teacher feature width D_T (<= d_latent)
    teacher_seed: int = 7    # seeds the frozen teacher projection
    n_tokens: int = 16       # N = G*G
    d_latent: int = 16       # P*P values per token
    n_classes: int = 4       # real classes; id n_classes is the null label

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ConfigError(f"model.depth must be >= 1, got {self.depth}")
        if not 1 <= self.align_depth <= self.depth:
            raise ConfigError(f"model.align_depth must lie in [1, {self.depth}], got {self.align_depth}")
        if self.heads < 1 or self.d_model % self.heads:
            raise ConfigError(f"model.d_model ({self.d_model}) must be divisible by model.heads ({self.heads})")
        if self.mlp_ratio < 1 or self.time_freqs < 1:
            raise ConfigError("model.mlp_ratio and model.time_freqs must be >= 1")
        if not 1 <= self.d_teacher <= self.d_latent:
            raise ConfigError(
                f"model.d_teacher must lie in [1, d_latent={self.d_latent}] for an orthonormal "
                f"projection, got {self.d_teacher}"
            )
        if self.n_tokens < 2 or self.n_classes < 1 or self.teacher_seed < 0:
            raise ConfigError("n_tokens >= 2, n_classes >= 1 and teacher_seed >= 0 are required")

    @property
    def null_label(self) -> int:
        return self.n_classes

    @property
    def grid(self) -> int:
        return int(round(self.n_tokens ** 0.5))
