"""
Procedural shape datasets on a token grid.
"""

from src.synth.config import DataConfig
from src.synth.dataset_io import dataset_roundtrip, read_dataset, write_dataset
from src.synth.patchify import patchify, unpatchify
from src.synth.render import ImageSet, TokenImage, render_dataset, render_image
from src.synth.shape_factory import ShapeFactory

__all__ = [
    'DataConfig',
    'ImageSet',
    'ShapeFactory',
    'TokenImage',
    'dataset_roundtrip',
    'patchify',
    'read_dataset',
    'render_dataset',
    'render_image',
    'unpatchify',
    'write_dataset',
]
