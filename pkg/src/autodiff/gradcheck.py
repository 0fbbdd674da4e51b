"""
Finite-difference verification of recorded gradients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from src.autodiff.tensor import Tape, Tensor, precision
from src.pipeline.errors import LabError

logger = logging.getLogger(__name__)

ScalarFn = Callable[[Sequence[Tensor]], Tensor]

DENOM_FLOOR = 1e-8


@dataclass(frozen=True)
class GradCheckReport:
    op_name: str
    max_rel_error: float
    step_size: float
    passed: bool
    tolerance: float
    diagnostic: str = ""


def _evaluate(fn: ScalarFn, arrays: Sequence[np.ndarray]) -> float:
    value = fn([Tensor(a) for a in arrays]).item()
    if not math.isfinite(value):
        raise FloatingPointError(f"non-finite evaluation {value}")
    return value


def grad_check(
    fn: ScalarFn,
    point: Sequence,
    step: float = 1e-3,
    tol: float = 1e-3,
    op_name: str = "fn",
) -> GradCheckReport:
    """
    Compare backward gradients of ``fn`` with central differences.

    ``fn`` receives one tensor per entry of ``point`` and must return a scalar
    tensor. It is called once with recorded leaves and then repeatedly with
    constants at perturbed coordinates. Everything runs in 64-bit.

    Args:
        fn: Scalar function of the point tensors
        point: Arrays or tensors at which to check
        step: Finite-difference half-width h
        tol: Pass threshold on the max relative error
        op_name: Label carried into the report

    Returns:
        GradCheckReport with the max relative error over all coordinates
    """
    with precision(np.float64):
        arrays: List[np.ndarray] = [
            np.array(p.data if isinstance(p, Tensor) else p, dtype=np.float64) for p in point
        ]
        try:
            tape = Tape()
            leaves = [tape.watch(a, name=f"x{i}") for i, a in enumerate(arrays)]
            root = fn(leaves)
            if root.size != 1:
                raise ValueError(f"{op_name} must return a scalar, got shape {root.shape}")
            if root.recorded:
                table = tape.backward(root)
                analytic = [table.of(leaf) for leaf in leaves]
            else:
                analytic = [np.zeros_like(a) for a in arrays]

            max_err = 0.0
            for arr, grad in zip(arrays, analytic):
                flat = arr.reshape(-1)
                grad_flat = grad.reshape(-1)
                for k in range(flat.size):
                    original = flat[k]
                    flat[k] = original + step
                    f_plus = _evaluate(fn, arrays)
                    flat[k] = original - step
                    f_minus = _evaluate(fn, arrays)
                    flat[k] = original
                    numeric = (f_plus - f_minus) / (2.0 * step)
                    exact = float(grad_flat[k])
                    denom = max(abs(exact), abs(numeric), DENOM_FLOOR)
                    max_err = max(max_err, abs(exact - numeric) / denom)
        except (LabError, FloatingPointError) as err:
            logger.warning("grad_check %s failed to evaluate: %s", op_name, err)
            return GradCheckReport(op_name, math.inf, step, False, tol, diagnostic=str(err))

    passed = max_err < tol
    if not passed:
        logger.debug("grad_check %s: max_rel_error %.3e >= tol %.1e", op_name, max_err, tol)
    return GradCheckReport(op_name, max_err, step, passed, tol)
