"""
Image <-> token conversion. Token k holds patch (k // G, k % G), flattened row-major.
Both functions accept leading batch axes.
"""

import numpy as np

from src.pipeline.errors import ShapeError


def patchify(pixels: np.ndarray, grid: int, patch: int) -> np.ndarray:
    pixels = np.asarray(pixels)
    side = grid * patch
    if pixels.ndim < 2 or pixels.shape[-2:] != (side, side):
        raise ShapeError(f"patchify: expected [..., {side}, {side}] pixels for G={grid}, P={patch}, got {pixels.shape}")
    lead = pixels.shape[:-2]
    nd = len(lead)
    x = pixels.reshape(lead + (grid, patch, grid, patch))
    x = x.transpose(tuple(range(nd)) + (nd, nd + 2, nd + 1, nd + 3))
    return x.reshape(lead + (grid * grid, patch * patch))


def unpatchify(tokens: np.ndarray, grid: int, patch: int) -> np.ndarray:
    tokens = np.asarray(tokens)
    if tokens.ndim < 2 or tokens.shape[-2:] != (grid * grid, patch * patch):
        raise ShapeError(
            f"unpatchify: expected [..., {grid * grid}, {patch * patch}] tokens for G={grid}, P={patch}, "
            f"got {tokens.shape}"
        )
    lead = tokens.shape[:-2]
    nd = len(lead)
    x = tokens.reshape(lead + (grid, grid, patch, patch))
    x = x.transpose(tuple(range(nd)) + (nd, nd + 2, nd + 1, nd + 3))
    return x.reshape(lead + (grid * patch, grid * patch))
