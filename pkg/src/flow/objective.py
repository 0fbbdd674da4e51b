from __future__ import annotations

import numpy as np

from src.align.features import AlignmentLossBreakdown
from src.autodiff import functions as F
from src.autodiff.tensor import Tensor
from src.pipeline.errors import ShapeError


def fm_loss(predicted_v: Tensor, x0: np.ndarray, x1: np.ndarray) -> Tensor:
    """Mean squared error between the predicted and the target velocity x1 - x0."""
    target = np.asarray(x1) - np.asarray(x0)
    if predicted_v.shape != target.shape:
        raise ShapeError(f"fm_loss: prediction {predicted_v.shape} vs target {target.shape}")
    return F.mean(F.square(F.sub(predicted_v, Tensor(target))))


def total_training_loss(fm: Tensor, align: AlignmentLossBreakdown) -> Tensor:
    """L_flow + lambda_proj·L_proj + lambda_struc·L_struc (the weights live in ``align.combined``)."""
    return F.add(fm, align.combined)
