"""
Binary PGM (P5, maxval 255) images.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import numpy as np

from src.pipeline.errors import DatasetFormatError, ShapeError
from src.pipeline.utils import ensure_dir


def round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def unit_to_gray(values: np.ndarray) -> np.ndarray:
    """Affine map [-1, 1] -> [0, 255]: round((v + 1)·127.5), clipped."""
    return np.clip(round_half_up((np.asarray(values, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def write_pgm(path: Union[str, Path], gray: np.ndarray) -> Path:
    gray = np.asarray(gray)
    if gray.ndim != 2 or gray.dtype != np.uint8:
        raise ShapeError(f"write_pgm expects a 2-D uint8 image, got {gray.shape} {gray.dtype}")
    path = Path(path)
    ensure_dir(path.parent)
    height, width = gray.shape
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + gray.tobytes())
    return path


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    blob = path.read_bytes()
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise DatasetFormatError(f"{path}: not a binary PGM (P5) file")
    width, height = (int(v) for v in parts[1].split())
    if parts[2] != b"255":
        raise DatasetFormatError(f"{path}: unsupported maxval {parts[2]!r}")
    pixels = np.frombuffer(parts[3], dtype=np.uint8)
    if pixels.size != width * height:
        raise DatasetFormatError(f"{path}: expected {width * height} pixels, found {pixels.size}")
    return pixels.reshape(height, width)


def tile(images: Sequence[np.ndarray], columns: int, pad: int = 1, fill: int = 0) -> np.ndarray:
    """Tile equally sized gray images into one grid image."""
    if not images:
        raise ShapeError("tile needs at least one image")
    h, w = images[0].shape
    columns = max(1, min(columns, len(images)))
    rows = -(-len(images) // columns)
    canvas = np.full((rows * (h + pad) - pad, columns * (w + pad) - pad), fill, dtype=np.uint8)
    for k, img in enumerate(images):
        r, c = divmod(k, columns)
        canvas[r * (h + pad): r * (h + pad) + h, c * (w + pad): c * (w + pad) + w] = img
    return canvas
