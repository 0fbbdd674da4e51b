"""
Feature-map containers shared by the alignment losses.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from src.autodiff.tensor import Tensor
from src.pipeline.errors import ConfigError, ShapeError


class FeatureKind(str, Enum):
    TEACHER_RAW = "teacher-raw"
    STUDENT_RAW = "student-raw"
    TEACHER_NORMALIZED = "teacher-normalized"
    STUDENT_NORMALIZED = "student-normalized"

    @property
    def normalized(self) -> bool:
        return self in (FeatureKind.TEACHER_NORMALIZED, FeatureKind.STUDENT_NORMALIZED)

    @property
    def is_teacher(self) -> bool:
        return self in (FeatureKind.TEACHER_RAW, FeatureKind.TEACHER_NORMALIZED)

    def as_normalized(self) -> "FeatureKind":
        return FeatureKind.TEACHER_NORMALIZED if self.is_teacher else FeatureKind.STUDENT_NORMALIZED


class SimilaritySource(str, Enum):
    TEACHER = "teacher"
    STUDENT = "student"


@dataclass(frozen=True)
class FeatureMap:
    """
    Per-token features, shape [N, D] or batched [B, N, D].

    Args:
        values: Feature tensor; tokens on axis -2, channels on axis -1
        kind: Which role the features play (raw/normalized, teacher/student)
        token_grid: (G, G) with G*G == N, when the tokens come from an image grid
    """

    values: Tensor
    kind: FeatureKind
    token_grid: Optional[Tuple[int, int]] = None

    def __post_init__(self) -> None:
        if self.values.ndim < 2:
            raise ShapeError(f"FeatureMap needs at least [N, D], got {self.values.shape}")
        if self.token_grid is not None:
            rows, cols = self.token_grid
            if rows * cols != self.n_tokens:
                raise ShapeError(f"token_grid {self.token_grid} does not cover N={self.n_tokens}")

    @property
    def n_tokens(self) -> int:
        return self.values.shape[-2]

    @property
    def width(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True)
class SimilarityMatrix:
    """Off-diagonal cosine similarities, shape [..., N, N-1]."""

    offdiag: Tensor
    source: SimilaritySource

    @property
    def n_tokens(self) -> int:
        return self.offdiag.shape[-2]


@dataclass(frozen=True)
class RelationalDistribution:
    """Row-softmax of an off-diagonal similarity matrix."""

    probs: Tensor
    temperature: float

    @property
    def n_tokens(self) -> int:
        return self.probs.shape[-2]


STRUC_VARIANTS = ("mse", "kl", "none")

# lambda_struc when a config leaves it out
DEFAULT_STRUC_WEIGHTS = {"mse": 2.0, "kl": 0.5, "none": 0.0}


@dataclass(frozen=True)
class LossWeights:
    lambda_proj: float = 1.0    # point-wise cosine term
    lambda_struc: Optional[float] = None  # structural term; None takes the variant default
    variant: str = "mse"        # "mse" | "kl" | "none"
    tau_t: float = 0.2          # teacher temperature, kl only
    tau_s: float = 0.2          # student temperature, kl only

    def __post_init__(self) -> None:
        if self.variant not in STRUC_VARIANTS:
            raise ConfigError(f"Unknown loss.variant: {self.variant}. Available variants: {list(STRUC_VARIANTS)}")
        if self.lambda_struc is None:
            object.__setattr__(self, "lambda_struc", DEFAULT_STRUC_WEIGHTS[self.variant])
        if self.lambda_proj < 0 or self.lambda_struc < 0:
            raise ConfigError(
                f"Loss weights must be nonnegative, got lambda_proj={self.lambda_proj}, "
                f"lambda_struc={self.lambda_struc}"
            )
        if self.tau_t <= 0 or self.tau_s <= 0:
            raise ConfigError(f"Temperatures must be positive, got tau_t={self.tau_t}, tau_s={self.tau_s}")


@dataclass(frozen=True)
class AlignmentLossBreakdown:
    loss_proj: Tensor
    loss_struc: Tensor
    combined: Tensor
