from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from src.align.features import FeatureKind, FeatureMap
from src.autodiff import functions as F
from src.autodiff.tensor import Tensor, as_tensor
from src.nets.layers import BoundParameters, ParameterSet, bind, dense
from src.pipeline.errors import ShapeError

PROJECTOR_LAYERS = 3


@dataclass
class ProjectionHead:
    """Three affine layers with SiLU between them: d_model -> d_model -> d_model -> d_teacher."""

    d_model: int
    d_teacher: int
    params: ParameterSet


def projector_forward(
    head: ProjectionHead,
    hidden,
    bound: Optional[BoundParameters] = None,
    token_grid: Optional[Tuple[int, int]] = None,
) -> FeatureMap:
    """Per-token projection of tapped student states into teacher feature space."""
    hidden = as_tensor(hidden)
    if hidden.shape[-1] != head.d_model:
        raise ShapeError(f"projector_forward: hidden width {hidden.shape[-1]} != d_model {head.d_model}")
    if bound is None:
        bound = bind(head.params)
    x: Tensor = hidden
    for layer in range(PROJECTOR_LAYERS):
        x = dense(x, bound, f"proj.{layer}")
        if layer < PROJECTOR_LAYERS - 1:
            x = F.silu(x)
    return FeatureMap(x, FeatureKind.STUDENT_RAW, token_grid)
