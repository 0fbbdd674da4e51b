"""
Factory for structural alignment losses, keyed by ``loss.variant``.
"""

import logging
from typing import Dict, List, Type

from src.align.base import StructuralLoss
from src.align.structural import KlStructuralLoss, MseStructuralLoss, NoStructuralLoss
from src.pipeline.errors import ConfigError


class StructuralLossFactory:
    """
    Usage:
        factory = StructuralLossFactory()
        loss = factory.create_loss('kl')
        value = loss.compute(z_t, z_s, weights)
    """

    def __init__(self) -> None:
        self.logger = logging.getLogger(__name__)
        self._losses: Dict[str, Type[StructuralLoss]] = {
            'mse': MseStructuralLoss,
            'kl': KlStructuralLoss,
            'none': NoStructuralLoss,
        }

    def create_loss(self, variant: str) -> StructuralLoss:
        """
        Args:
            variant: Structural variant name ('mse', 'kl', 'none')

        Returns:
            StructuralLoss instance

        Raises:
            ConfigError: If the variant is not registered
        """
        key = variant.lower()
        if key not in self._losses:
            raise ConfigError(
                f"Unknown structural loss: {variant}. "
                f"Available types: {self.available()}"
            )
        return self._losses[key]()

    def register_loss(self, variant: str, loss_class: Type[StructuralLoss]) -> None:
        self._losses[variant.lower()] = loss_class
        self.logger.info("Registered structural loss: %s -> %s", variant, loss_class.__name__)

    def available(self) -> List[str]:
        return list(self._losses.keys())
