from __future__ import annotations

from abc import ABC, abstractmethod

from src.align.features import FeatureMap, LossWeights
from src.autodiff.tensor import Tensor


class StructuralLoss(ABC):
    """
    Abstract base for structural (token-to-token) alignment terms.

    Implementations receive L2-normalized teacher and student maps of equal
    shape and return a scalar tensor differentiable through the student map.
    """

    name: str = "base"

    @abstractmethod
    def compute(self, z_t: FeatureMap, z_s: FeatureMap, weights: LossWeights) -> Tensor:
        raise NotImplementedError
