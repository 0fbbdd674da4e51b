"""
Frozen teacher encoder.

Clean tokens go through a seeded orthonormal projection, a fixed 4-neighbour
averaging stencil over the token grid and a tanh. The output depends only on
the input and the seed and never carries gradient.
"""

from __future__ import annotations

import numpy as np

from src.align.features import FeatureKind, FeatureMap
from src.autodiff.tensor import Tensor
from src.pipeline.errors import ConfigError, ShapeError

SELF_WEIGHT = 0.5


def neighbor_stencil(grid: int) -> np.ndarray:
    """[N, N] row-stochastic mixing: 0.5 on self, 0.5 split over existing 4-neighbours."""
    n = grid * grid
    mixing = np.zeros((n, n), dtype=np.float64)
    for row in range(grid):
        for col in range(grid):
            k = row * grid + col
            neighbours = [
                (r, c)
                for r, c in ((row - 1, col), (row + 1, col), (row, col - 1), (row, col + 1))
                if 0 <= r < grid and 0 <= c < grid
            ]
            mixing[k, k] = SELF_WEIGHT
            for r, c in neighbours:
                mixing[k, r * grid + c] = (1.0 - SELF_WEIGHT) / len(neighbours)
    return mixing


def orthonormal_projection(seed: int, d_in: int, d_out: int) -> np.ndarray:
    """[d_in, d_out] with orthonormal columns, sign-fixed so it is seed-deterministic."""
    if d_out > d_in:
        raise ConfigError(f"Orthonormal projection needs d_out <= d_in, got {d_in} -> {d_out}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d_in, d_out)))
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs[None, :]


class TeacherEncoder:
    def __init__(self, seed: int, d_patch: int, d_teacher: int, grid: int) -> None:
        if grid < 2:
            raise ConfigError(f"Teacher grid must be >= 2, got {grid}")
        self.seed = seed
        self.grid = grid
        self.d_patch = d_patch
        self.d_teacher = d_teacher
        self.projection = orthonormal_projection(seed, d_patch, d_teacher)
        self.mixing = neighbor_stencil(grid)

    @classmethod
    def from_config(cls, config) -> "TeacherEncoder":
        return cls(config.teacher_seed, config.d_latent, config.d_teacher, config.grid)

    def features(self, x1_clean) -> np.ndarray:
        x = np.asarray(x1_clean, dtype=np.float64)
        if x.ndim < 2 or x.shape[-2:] != (self.grid * self.grid, self.d_patch):
            raise ShapeError(
                f"teacher_encode: expected [..., {self.grid * self.grid}, {self.d_patch}] tokens, got {x.shape}"
            )
        return np.tanh(self.mixing @ (x @ self.projection))


def teacher_encode(teacher: TeacherEncoder, x1_clean) -> FeatureMap:
    """Raw teacher features H^T of clean tokens, as a constant feature map."""
    return FeatureMap(
        Tensor(teacher.features(x1_clean)),
        FeatureKind.TEACHER_RAW,
        (teacher.grid, teacher.grid),
    )
