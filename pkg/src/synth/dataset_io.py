"""
Binary dataset files.

Layout (little-endian): b"SRPD", u32 version=1, u32 G, u32 P, u32 n_classes,
u32 n_images, then per image a u32 label followed by the (G*P)² float32 pixels
in row-major order.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from src.pipeline.errors import DatasetFormatError
from src.pipeline.utils import ensure_dir
from src.synth.render import ImageSet

logger = logging.getLogger(__name__)

MAGIC = b"SRPD"
VERSION = 1
_HEADER = struct.Struct("<4s5I")


def _record_dtype(side: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("pixels", "<f4", (side, side))])


def write_dataset(images: ImageSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    ensure_dir(path.parent)
    side = images.grid * images.patch
    records = np.zeros(len(images), dtype=_record_dtype(side))
    records["label"] = images.labels
    records["pixels"] = images.pixels
    header = _HEADER.pack(MAGIC, VERSION, images.grid, images.patch, images.n_classes, len(images))
    path.write_bytes(header + records.tobytes())
    logger.info("Wrote %d images to %s", len(images), path)
    return path


def read_dataset(path: Union[str, Path]) -> ImageSet:
    """
    Raises:
        DatasetFormatError: On bad magic, version, truncated data or invalid labels,
            with the byte offset where validation failed
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header, {len(blob)} of {_HEADER.size} bytes (offset {len(blob)})")
    magic, version, grid, patch, n_classes, n_images = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version} at offset 4, expected {VERSION}")
    if grid < 2 or patch < 2 or n_classes < 1:
        raise DatasetFormatError(f"{path}: invalid layout G={grid}, P={patch}, n_classes={n_classes} at offset 8")

    side = grid * patch
    dtype = _record_dtype(side)
    expected = _HEADER.size + n_images * dtype.itemsize
    if len(blob) != expected:
        raise DatasetFormatError(
            f"{path}: length mismatch, expected {expected} bytes for {n_images} images, "
            f"found {len(blob)} (offset {min(len(blob), expected)})"
        )
    records = np.frombuffer(blob, dtype=dtype, count=n_images, offset=_HEADER.size)
    labels = records["label"].astype(np.int64)
    bad = np.flatnonzero(labels >= n_classes)
    if bad.size:
        offset = _HEADER.size + int(bad[0]) * dtype.itemsize
        raise DatasetFormatError(f"{path}: label {labels[bad[0]]} >= n_classes {n_classes} at offset {offset}")
    pixels = records["pixels"].astype(np.float32)
    return ImageSet(grid, patch, n_classes, pixels, labels)


def dataset_roundtrip(images: ImageSet, path: Union[str, Path]) -> ImageSet:
    """Write then read back."""
    write_dataset(images, path)
    return read_dataset(path)
