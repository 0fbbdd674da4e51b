"""
Student velocity network with a hidden-state tap at the alignment depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.autodiff import functions as F
from src.autodiff.tensor import Tensor, as_tensor
from src.nets.config import StudentConfig
from src.nets.layers import (
    BoundParameters,
    ParameterSet,
    bind,
    dense,
    norm,
    timestep_features,
    transformer_block,
)
from src.pipeline.errors import ShapeError


@dataclass
class StudentNetwork:
    config: StudentConfig
    params: ParameterSet

    def __call__(self, x: np.ndarray, t: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Velocity as a plain array, for the sampler."""
        velocity, _ = student_forward(self, x, t, labels)
        return velocity.numpy()

    def with_params(self, params: ParameterSet) -> "StudentNetwork":
        return StudentNetwork(self.config, params)


def _check_inputs(cfg: StudentConfig, xt: Tensor, t: np.ndarray, labels: np.ndarray) -> None:
    if xt.ndim != 3 or xt.shape[1:] != (cfg.n_tokens, cfg.d_latent):
        raise ShapeError(
            f"student_forward: expected x_t of shape [B, {cfg.n_tokens}, {cfg.d_latent}], got {xt.shape}"
        )
    batch = xt.shape[0]
    if t.shape != (batch,):
        raise ShapeError(f"student_forward: t must have shape ({batch},), got {t.shape}")
    if labels.shape != (batch,):
        raise ShapeError(f"student_forward: labels must have shape ({batch},), got {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() > cfg.null_label):
        raise ShapeError(
            f"student_forward: labels must lie in [0, {cfg.null_label}] (null id {cfg.null_label}), "
            f"got range [{labels.min()}, {labels.max()}]"
        )


def student_forward(
    net: StudentNetwork,
    xt,
    t,
    labels,
    bound: Optional[BoundParameters] = None,
) -> Tuple[Tensor, Tensor]:
    """
    Predict the velocity at (x_t, t, label) and tap the residual stream.

    Args:
        net: Student configuration and parameters
        xt: Noisy tokens [B, N, d_latent]
        t: Times [B]
        labels: Class ids [B]; the null id selects the unconditional embedding
        bound: Pre-bound parameter tensors (e.g. watched on a tape); when None
            the parameters are used as constants

    Returns:
        (velocity [B, N, d_latent], hidden [B, N, d_model]) where hidden is the
        output of block ``align_depth``
    """
    cfg = net.config
    xt = as_tensor(xt)
    t = np.asarray(t).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    _check_inputs(cfg, xt, t, labels)
    if bound is None:
        bound = bind(net.params)

    batch, n, d = xt.shape[0], cfg.n_tokens, cfg.d_model
    tokens = dense(xt, bound, "token_embed")
    positions = F.broadcast_to(F.reshape(bound["pos_table"], (1, n, d)), (batch, n, d))

    time_hidden = F.silu(dense(Tensor(timestep_features(t, cfg.time_freqs)), bound, "time_mlp.0"))
    condition = F.add(dense(time_hidden, bound, "time_mlp.1"), F.embedding(bound["class_table"], labels))
    condition = F.broadcast_to(F.reshape(condition, (batch, 1, d)), (batch, n, d))

    h = F.add(F.add(tokens, positions), condition)
    hidden = h
    for index in range(1, cfg.depth + 1):
        h = transformer_block(h, bound, f"blocks.{index}", cfg.heads)
        if index == cfg.align_depth:
            hidden = h

    velocity = dense(norm(h, bound, "final_ln"), bound, "head")
    return velocity, hidden
