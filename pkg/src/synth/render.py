"""
Seeded procedural rendering of labelled shape images.

Every image is a pure function of (seed, index), so datasets can be rendered in
any order or concurrently and still come out identical.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from src.pipeline.errors import ShapeError
from src.synth.config import VALUE_RANGE, DataConfig
from src.synth.patchify import patchify
from src.synth.shape_factory import ShapeFactory

logger = logging.getLogger(__name__)

SUPERSAMPLE = 2
INTENSITY_RANGE = (0.4, 1.0)
BACKGROUND_RANGE = (-1.0, -0.6)

_FACTORY = ShapeFactory()


@dataclass(frozen=True)
class TokenImage:
    pixels: np.ndarray   # [S, S] float32 in [-1, 1]
    tokens: np.ndarray   # [G*G, P*P]
    label: int


@dataclass(frozen=True)
class ImageSet:
    """A batch of images sharing one grid layout."""

    grid: int
    patch: int
    n_classes: int
    pixels: np.ndarray   # [n, S, S] float32
    labels: np.ndarray   # [n] int64

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def tokens(self) -> np.ndarray:
        return patchify(self.pixels, self.grid, self.patch)

    def image(self, index: int) -> TokenImage:
        if not 0 <= index < len(self):
            raise ShapeError(f"Image index {index} out of range [0, {len(self)})")
        pixels = self.pixels[index]
        return TokenImage(pixels, patchify(pixels, self.grid, self.patch), int(self.labels[index]))

    def subset(self, indices: Sequence[int]) -> "ImageSet":
        idx = np.asarray(indices, dtype=np.int64)
        return ImageSet(self.grid, self.patch, self.n_classes, self.pixels[idx], self.labels[idx])

    @classmethod
    def from_images(cls, images: Sequence[TokenImage], grid: int, patch: int, n_classes: int) -> "ImageSet":
        pixels = np.stack([img.pixels for img in images]).astype(np.float32)
        labels = np.array([img.label for img in images], dtype=np.int64)
        return cls(grid, patch, n_classes, pixels, labels)


def _sample_points(side: int) -> tuple:
    offsets = (np.arange(side * SUPERSAMPLE) + 0.5) / SUPERSAMPLE
    return np.meshgrid(offsets, offsets, indexing="ij")


def render_image(config: DataConfig, index: int) -> TokenImage:
    """
    Render image ``index``: class index mod n_classes, geometry from a per-index stream.

    Raises:
        ShapeError: If index lies outside [0, n_images)
    """
    if not 0 <= index < config.n_images:
        raise ShapeError(f"render_image: index {index} out of range [0, {config.n_images})")
    label = index % config.n_classes
    rng = np.random.default_rng([config.seed, index])
    background = rng.uniform(*BACKGROUND_RANGE)
    intensity = rng.uniform(*INTENSITY_RANGE)
    shape = _FACTORY.for_class(label)
    params = shape.sample_params(rng, config.side)

    ys, xs = _sample_points(config.side)
    hits = shape.inside(ys, xs, params).astype(np.float64)
    coverage = hits.reshape(config.side, SUPERSAMPLE, config.side, SUPERSAMPLE).mean(axis=(1, 3))
    pixels = np.clip(background + (intensity - background) * coverage, *VALUE_RANGE).astype(np.float32)
    return TokenImage(pixels, patchify(pixels, config.grid, config.patch), label)


def render_dataset(config: DataConfig, workers: int = 1) -> ImageSet:
    """Render all ``n_images`` images, optionally on a thread pool (order-preserving)."""
    indices = range(config.n_images)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            images: List[TokenImage] = list(pool.map(lambda i: render_image(config, i), indices))
    else:
        images = [render_image(config, i) for i in indices]
    logger.info("Rendered %d images (G=%d, P=%d, seed=%d)", config.n_images, config.grid, config.patch, config.seed)
    return ImageSet.from_images(images, config.grid, config.patch, config.n_classes)
