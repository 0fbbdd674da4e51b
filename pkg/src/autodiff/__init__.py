"""
Dense tensors with reverse-mode differentiation.
"""

from src.autodiff.tensor import GradientTable, Tape, Tensor, default_dtype, precision
from src.autodiff.gradcheck import GradCheckReport, grad_check
from src.autodiff import functions

__all__ = [
    "GradientTable",
    "GradCheckReport",
    "Tape",
    "Tensor",
    "default_dtype",
    "functions",
    "grad_check",
    "precision",
]
