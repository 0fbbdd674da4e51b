from __future__ import annotations

from src.align.factory import StructuralLossFactory
from src.align.features import AlignmentLossBreakdown, FeatureMap, LossWeights
from src.align.losses import normalize, pointwise_loss
from src.autodiff import functions as F
from src.autodiff.tensor import Tensor
from src.pipeline.errors import ShapeError

_FACTORY = StructuralLossFactory()


def total_alignment_loss(
    h_t_raw: FeatureMap,
    h_s_projected: FeatureMap,
    weights: LossWeights,
) -> AlignmentLossBreakdown:
    """
    Normalize both maps, then combine the point-wise and structural terms.

    Both terms consume the same projected student features.

    Returns:
        AlignmentLossBreakdown with combined = lambda_proj*proj + lambda_struc*struc
    """
    if h_t_raw.values.shape != h_s_projected.values.shape:
        raise ShapeError(
            f"total_alignment_loss: teacher {h_t_raw.values.shape} vs "
            f"projected student {h_s_projected.values.shape}"
        )
    if h_t_raw.n_tokens < 2:
        raise ShapeError(f"total_alignment_loss needs N >= 2, got N={h_t_raw.n_tokens}")

    try:
        z_t = normalize(h_t_raw)
        z_s = normalize(h_s_projected)
        loss_proj = pointwise_loss(z_t, z_s)
        loss_struc = _FACTORY.create_loss(weights.variant).compute(z_t, z_s, weights)
    except ShapeError as err:
        raise ShapeError(f"total_alignment_loss ({weights.variant}): {err}") from err

    return combine_alignment(loss_proj, loss_struc, weights)


def combine_alignment(loss_proj: Tensor, loss_struc: Tensor, weights: LossWeights) -> AlignmentLossBreakdown:
    combined = F.add(F.scale(loss_proj, weights.lambda_proj), F.scale(loss_struc, weights.lambda_struc))
    return AlignmentLossBreakdown(loss_proj=loss_proj, loss_struc=loss_struc, combined=combined)
