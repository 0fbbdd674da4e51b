"""
Registry of shape classes. Class id k renders the k-th registered shape.
"""

from typing import Dict, List, Type

from src.pipeline.errors import ConfigError
from src.synth.base_shape import ShapeRenderer
from src.synth.shapes import CrossRenderer, DiskRenderer, HorizontalStripesRenderer, SquareRenderer


class ShapeFactory:
    def __init__(self) -> None:
        # Insertion order defines class ids.
        self._shapes: Dict[str, Type[ShapeRenderer]] = {
            'disk': DiskRenderer,
            'square': SquareRenderer,
            'cross': CrossRenderer,
            'hstripes': HorizontalStripesRenderer,
        }

    def class_names(self) -> List[str]:
        return list(self._shapes.keys())

    def create_shape(self, name: str) -> ShapeRenderer:
        if name not in self._shapes:
            raise ConfigError(f"Unknown shape: {name}. Available types: {self.class_names()}")
        return self._shapes[name]()

    def for_class(self, class_id: int) -> ShapeRenderer:
        names = self.class_names()
        if not 0 <= class_id < len(names):
            raise ConfigError(f"Class id {class_id} has no shape; {len(names)} shapes are registered")
        return self.create_shape(names[class_id])
