"""
Representation alignment losses: point-wise cosine, Gram MSE and relational KL.
"""

from src.align.features import (
    AlignmentLossBreakdown,
    FeatureKind,
    FeatureMap,
    LossWeights,
    RelationalDistribution,
    SimilarityMatrix,
    SimilaritySource,
)
from src.align.losses import (
    gram_offdiag,
    normalize,
    pointwise_loss,
    relational_softmax,
    struc_kl_loss,
    struc_mse_loss,
)
from src.align.factory import StructuralLossFactory
from src.align.total import combine_alignment, total_alignment_loss

__all__ = [
    'AlignmentLossBreakdown',
    'FeatureKind',
    'FeatureMap',
    'LossWeights',
    'RelationalDistribution',
    'SimilarityMatrix',
    'SimilaritySource',
    'StructuralLossFactory',
    'gram_offdiag',
    'normalize',
    'pointwise_loss',
    'relational_softmax',
    'struc_kl_loss',
    'struc_mse_loss',
    'combine_alignment',
    'total_alignment_loss',
]
