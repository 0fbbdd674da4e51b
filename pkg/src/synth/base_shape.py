"""
Abstract base class for procedural shape classes.

Each renderer draws its geometric parameters from a per-image generator and
answers point-membership queries; rasterization and anti-aliasing are shared.
"""

from abc import ABC, abstractmethod
from typing import Dict

import numpy as np

Params = Dict[str, float]


class ShapeRenderer(ABC):
    name: str = "base"

    @abstractmethod
    def sample_params(self, rng: np.random.Generator, side: int) -> Params:
        """
        Draw the geometry of one instance.

        Args:
            rng: Per-image generator (already advanced past background/intensity)
            side: Image side length in pixels

        Returns:
            Parameter dict consumed by ``inside``
        """
        pass

    @abstractmethod
    def inside(self, ys: np.ndarray, xs: np.ndarray, params: Params) -> np.ndarray:
        """
        Boolean membership of sample points (pixel-unit coordinates).
        """
        pass

    @staticmethod
    def sample_center(rng: np.random.Generator, side: int) -> Params:
        return {
            "cy": float(rng.uniform(0.3, 0.7) * side),
            "cx": float(rng.uniform(0.3, 0.7) * side),
        }
