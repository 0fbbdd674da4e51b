"""
Point-wise and structural alignment losses between teacher and student features.

All losses average over every leading (batch) axis as well as over tokens.
Teacher-side inputs are detached, so gradients only reach the student path.
"""

from __future__ import annotations

import numpy as np

from src.align.features import (
    FeatureKind,
    FeatureMap,
    RelationalDistribution,
    SimilarityMatrix,
    SimilaritySource,
)
from src.autodiff import functions as F
from src.autodiff.tensor import Tensor
from src.pipeline.errors import ShapeError


def _swap_last(ndim: int) -> tuple:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def normalize(features: FeatureMap) -> FeatureMap:
    """L2-normalize every token row; teacher features are detached first."""
    values = features.values.detach() if features.kind.is_teacher else features.values
    return FeatureMap(F.row_l2_normalize(values), features.kind.as_normalized(), features.token_grid)


def pointwise_loss(z_t: FeatureMap, z_s: FeatureMap) -> Tensor:
    """Mean over tokens (and batch) of 1 - cos(z_s_i, z_t_i)."""
    if not (z_t.kind.normalized and z_s.kind.normalized):
        raise ShapeError(f"pointwise_loss needs normalized maps, got {z_t.kind.value} and {z_s.kind.value}")
    if z_t.values.shape != z_s.values.shape:
        raise ShapeError(f"pointwise_loss: teacher {z_t.values.shape} vs student {z_s.values.shape}")
    cos = F.sum(F.mul(z_t.values.detach(), z_s.values), axes=-1)
    return F.sub(Tensor(np.ones(())), F.mean(cos))


def gram_offdiag(z: FeatureMap) -> SimilarityMatrix:
    """Cosine Gram matrix Z·Zᵀ with the diagonal removed."""
    if not z.kind.normalized:
        raise ShapeError(f"gram_offdiag needs normalized features, got kind {z.kind.value}")
    if z.n_tokens < 2:
        raise ShapeError(f"gram_offdiag needs N >= 2, got N={z.n_tokens}")
    values = z.values
    gram = F.matmul(values, F.transpose(values, _swap_last(values.ndim)))
    source = SimilaritySource.TEACHER if z.kind.is_teacher else SimilaritySource.STUDENT
    return SimilarityMatrix(F.extract_offdiagonal(gram), source)


def _constant_if_teacher(s: SimilarityMatrix) -> Tensor:
    return s.offdiag.detach() if s.source is SimilaritySource.TEACHER else s.offdiag


def struc_mse_loss(s_t: SimilarityMatrix, s_s: SimilarityMatrix) -> Tensor:
    """Mean squared difference of the off-diagonal entries."""
    if s_t.offdiag.shape != s_s.offdiag.shape:
        raise ShapeError(f"struc_mse_loss: {s_t.offdiag.shape} vs {s_s.offdiag.shape}")
    diff = F.sub(_constant_if_teacher(s_t), _constant_if_teacher(s_s))
    return F.mean(F.square(diff))


def relational_softmax(s: SimilarityMatrix, temperature: float) -> RelationalDistribution:
    return RelationalDistribution(F.row_softmax(s.offdiag, temperature), float(temperature))


def struc_kl_loss(p_t: RelationalDistribution, p_s: RelationalDistribution) -> Tensor:
    """
    Per-token KL(P^T || P^S), summed over neighbours and averaged over tokens and batch.

    The teacher distribution is a constant; logs are floored at 1e-12.
    """
    if p_t.probs.shape != p_s.probs.shape:
        raise ShapeError(f"struc_kl_loss: {p_t.probs.shape} vs {p_s.probs.shape}")
    teacher = p_t.probs.data
    log_teacher = np.log(np.maximum(teacher, F.LOG_FLOOR))
    gap = F.sub(Tensor(log_teacher), F.log(p_s.probs))
    per_token = F.sum(F.mul(Tensor(teacher), gap), axes=-1)
    return F.mean(per_token)


def student_features(values: Tensor, token_grid=None) -> FeatureMap:
    return FeatureMap(values, FeatureKind.STUDENT_RAW, token_grid)


def teacher_features(values: Tensor, token_grid=None) -> FeatureMap:
    return FeatureMap(values.detach(), FeatureKind.TEACHER_RAW, token_grid)
