"""
Fréchet (Gaussian 2-Wasserstein) distance between pooled teacher-feature sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.evaluation.eigen import psd_sqrt, symmetric_eig
from src.nets.teacher import TeacherEncoder
from src.pipeline.errors import ShapeError


@dataclass(frozen=True)
class FrechetStats:
    mean: np.ndarray        # [D]
    covariance: np.ndarray  # [D, D], unbiased
    count: int


def teacher_descriptors(teacher: TeacherEncoder, tokens: np.ndarray) -> np.ndarray:
    """Per-image descriptor: token-mean of teacher features, shape [n, D_T]."""
    return teacher.features(tokens).mean(axis=-2)


def feature_stats(descriptors: np.ndarray) -> FrechetStats:
    """
    Raises:
        ShapeError: If fewer than 2 descriptors are given
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"feature_stats expects [n_images, D] descriptors, got {x.shape}")
    if x.shape[0] < 2:
        raise ShapeError(f"feature_stats needs at least 2 images, got {x.shape[0]}")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (x.shape[0] - 1)
    return FrechetStats(mean, 0.5 * (cov + cov.T), int(x.shape[0]))


def frechet_distance(a: FrechetStats, b: FrechetStats) -> float:
    """‖μa − μb‖² + Tr(Σa + Σb − 2(Σa^½ Σb Σa^½)^½), clamped at 0."""
    if a.mean.shape != b.mean.shape:
        raise ShapeError(f"frechet_distance: dimensions differ, {a.mean.shape} vs {b.mean.shape}")
    diff = a.mean - b.mean
    root_a = psd_sqrt(a.covariance)
    inner = root_a @ b.covariance @ root_a
    eigenvalues, _ = symmetric_eig(0.5 * (inner + inner.T))
    trace_root = float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))))
    value = float(diff @ diff) + float(np.trace(a.covariance) + np.trace(b.covariance)) - 2.0 * trace_root
    return max(value, 0.0)
