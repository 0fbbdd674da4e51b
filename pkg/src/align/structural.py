from __future__ import annotations

import numpy as np

from src.align.base import StructuralLoss
from src.align.features import FeatureMap, LossWeights
from src.align.losses import gram_offdiag, relational_softmax, struc_kl_loss, struc_mse_loss
from src.autodiff.tensor import Tensor


class MseStructuralLoss(StructuralLoss):
    """Squared error between the off-diagonal Gram entries."""

    name = "mse"

    def compute(self, z_t: FeatureMap, z_s: FeatureMap, weights: LossWeights) -> Tensor:
        return struc_mse_loss(gram_offdiag(z_t), gram_offdiag(z_s))


class KlStructuralLoss(StructuralLoss):
    """KL between temperature-softmaxed relational rows (teacher tau_t, student tau_s)."""

    name = "kl"

    def compute(self, z_t: FeatureMap, z_s: FeatureMap, weights: LossWeights) -> Tensor:
        p_t = relational_softmax(gram_offdiag(z_t), weights.tau_t)
        p_s = relational_softmax(gram_offdiag(z_s), weights.tau_s)
        return struc_kl_loss(p_t, p_s)


class NoStructuralLoss(StructuralLoss):
    """Plain point-wise alignment; the structural term is a constant zero."""

    name = "none"

    def compute(self, z_t: FeatureMap, z_s: FeatureMap, weights: LossWeights) -> Tensor:
        return Tensor(np.zeros(()))
