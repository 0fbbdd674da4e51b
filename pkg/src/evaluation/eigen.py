"""
Cyclic Jacobi eigensolver for small symmetric matrices.
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from src.pipeline.errors import NumericalError, ShapeError

logger = logging.getLogger(__name__)

OFFDIAG_TOL = 1e-10
MAX_SWEEPS = 100
RESIDUAL_TOL = 1e-6
SYMMETRY_TOL = 1e-6
MAX_DIM = 256


def _max_offdiag(a: np.ndarray) -> float:
    if a.shape[0] < 2:
        return 0.0
    return float(np.max(np.abs(a - np.diag(np.diag(a)))))


def _rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    apq = a[p, q]
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    col_p, col_q = a[:, p].copy(), a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p, row_q = a[p, :].copy(), a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q

    vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
    v[:, p] = c * vec_p - s * vec_q
    v[:, q] = s * vec_p + c * vec_q


def symmetric_eig(
    m: np.ndarray,
    tol: float = OFFDIAG_TOL,
    max_sweeps: int = MAX_SWEEPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Args:
        m: Symmetric [D, D] matrix (D <= 256)
        tol: Stop once the largest off-diagonal magnitude falls below this
            (scaled by the largest entry when that exceeds 1)
        max_sweeps: Sweep limit

    Returns:
        (eigenvalues ascending [D], eigenvectors as columns [D, D])

    Raises:
        ShapeError: If the input is not square, symmetric or small enough
        NumericalError: If the sweep limit is hit or the reconstruction residual
            exceeds 1e-6
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"symmetric_eig needs a square matrix, got {m.shape}")
    if m.shape[0] > MAX_DIM:
        raise ShapeError(f"symmetric_eig supports D <= {MAX_DIM}, got {m.shape[0]}")
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > SYMMETRY_TOL:
        raise ShapeError(f"symmetric_eig: input asymmetric by {asym:.3e}")

    n = m.shape[0]
    a = 0.5 * (m + m.T)
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)

    sweeps = 0
    while _max_offdiag(a) >= threshold:
        if sweeps == max_sweeps:
            raise NumericalError(
                f"symmetric_eig did not converge in {max_sweeps} sweeps "
                f"(max off-diagonal {_max_offdiag(a):.3e})"
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] != 0.0:
                    _rotate(a, v, p, q)
        sweeps += 1

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="mergesort")
    eigenvalues, v = eigenvalues[order], v[:, order]

    residual = float(np.max(np.abs((v * eigenvalues) @ v.T - m))) if n else 0.0
    if residual >= RESIDUAL_TOL:
        raise NumericalError(f"symmetric_eig reconstruction residual {residual:.3e} >= {RESIDUAL_TOL}")
    logger.debug("symmetric_eig: D=%d converged in %d sweeps, residual %.2e", n, sweeps, residual)
    return eigenvalues, v


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix; negative eigenvalues clamp to 0."""
    eigenvalues, vectors = symmetric_eig(m)
    return (vectors * np.sqrt(np.clip(eigenvalues, 0.0, None))) @ vectors.T
