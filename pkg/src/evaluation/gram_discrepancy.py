"""
Gram discrepancy: how far the student's token-to-token similarity structure
sits from the teacher's on held-out images.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from src.align.features import FeatureMap
from src.align.losses import gram_offdiag, normalize, struc_mse_loss
from src.flow.interpolant import interpolate
from src.nets.projector import projector_forward
from src.nets.student import student_forward
from src.nets.teacher import teacher_encode
from src.pipeline.errors import ShapeError
from src.synth.render import ImageSet
from src.training.checkpoint import Checkpoint, models_from_checkpoint

logger = logging.getLogger(__name__)

T_GRID = (0.25, 0.5, 0.75)


def gram_discrepancy_from_features(h_t: FeatureMap, h_s: FeatureMap) -> float:
    """struc_mse between the normalized teacher and student Grams, as a float."""
    s_t = gram_offdiag(normalize(h_t))
    s_s = gram_offdiag(normalize(h_s))
    return struc_mse_loss(s_t, s_s).item()


def shared_noise(tokens: np.ndarray, noise_seed: int) -> np.ndarray:
    return np.random.default_rng(noise_seed).standard_normal(tokens.shape).astype(tokens.dtype)


def gram_discrepancy(
    checkpoint: Checkpoint,
    eval_set: ImageSet,
    t_grid: Sequence[float] = T_GRID,
    noise_seed: int = 0,
    batch_size: int = 256,
) -> float:
    """
    Mean struc_mse over images and evaluation times, with EMA student weights.

    One noise draw (seeded by ``noise_seed``) is shared across every t in the grid.
    Chunk means are weighted by chunk size and summed in index order.
    """
    if len(eval_set) == 0:
        raise ShapeError("gram_discrepancy needs a nonempty evaluation set")
    if not t_grid:
        raise ShapeError("gram_discrepancy needs at least one evaluation time")
    student, head, teacher = models_from_checkpoint(checkpoint, use_ema=True)
    tokens = eval_set.tokens().astype(np.float32)
    labels = eval_set.labels
    x0 = shared_noise(tokens, noise_seed)

    n = tokens.shape[0]
    total = 0.0
    for t in t_grid:
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            t_vec = np.full(stop - start, t, dtype=np.float32)
            xt = interpolate(x0[start:stop], tokens[start:stop], t_vec)
            _, hidden = student_forward(student, xt, t_vec, labels[start:stop])
            h_t = teacher_encode(teacher, tokens[start:stop])
            h_s = projector_forward(head, hidden, token_grid=h_t.token_grid)
            total += gram_discrepancy_from_features(h_t, h_s) * (stop - start)
    value = total / (n * len(t_grid))
    logger.debug("gram_discrepancy: %d images x %d times -> %.6g", n, len(t_grid), value)
    return value
