"""
Linear noise-to-data interpolant and training-batch assembly.

t = 0 is pure noise, t = 1 is clean data: x_t = t·x1 + (1 − t)·x0, and the
target velocity along the path is the constant x1 − x0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.pipeline.errors import ShapeError


@dataclass(frozen=True)
class InterpolantSchedule:
    """
    Coefficients of the linear path. ``diffusion`` (w_t = sigma_t) would scale
    the noise term of a stochastic sampler; only the deterministic ODE is used.
    """

    def alpha(self, t):
        """Weight on the noise endpoint."""
        return 1.0 - np.asarray(t)

    def sigma(self, t):
        """Weight on the data endpoint."""
        return np.asarray(t)

    def diffusion(self, t):
        return self.sigma(t)


LINEAR = InterpolantSchedule()


@dataclass(frozen=True)
class FlowBatch:
    x0: np.ndarray        # [B, N, D] noise
    x1: np.ndarray        # [B, N, D] data
    t: np.ndarray         # [B]
    xt: np.ndarray        # [B, N, D]
    target_v: np.ndarray  # [B, N, D]
    labels: np.ndarray    # [B] class ids, null id allowed


def _per_sample(t: np.ndarray, ndim: int) -> np.ndarray:
    return t.reshape(t.shape + (1,) * (ndim - t.ndim))


def interpolate(x0: np.ndarray, x1: np.ndarray, t) -> np.ndarray:
    """
    Point on the path at time t (scalar, or one value per leading sample).

    Raises:
        ShapeError: If shapes differ or any t lies outside [0, 1]
    """
    x0 = np.asarray(x0)
    x1 = np.asarray(x1)
    if x0.shape != x1.shape:
        raise ShapeError(f"interpolate: x0 {x0.shape} vs x1 {x1.shape}")
    t = np.asarray(t, dtype=x1.dtype)
    if np.any(t < 0) or np.any(t > 1):
        raise ShapeError(f"interpolate: t must lie in [0, 1], got range [{t.min()}, {t.max()}]")
    if t.ndim:
        if t.shape != x1.shape[: t.ndim]:
            raise ShapeError(f"interpolate: t {t.shape} does not match leading axes of {x1.shape}")
        t = _per_sample(t, x1.ndim)
    return LINEAR.sigma(t) * x1 + LINEAR.alpha(t) * x0


def make_flow_batch(
    x1: np.ndarray,
    labels: np.ndarray,
    noise_rng: np.random.Generator,
    time_rng: np.random.Generator,
) -> FlowBatch:
    """Draw x0 ~ N(0, I) and t ~ U[0, 1] per sample, then interpolate."""
    x1 = np.asarray(x1)
    x0 = noise_rng.standard_normal(x1.shape).astype(x1.dtype)
    t = time_rng.random(x1.shape[0]).astype(x1.dtype)
    return FlowBatch(
        x0=x0,
        x1=x1,
        t=t,
        xt=interpolate(x0, x1, t),
        target_v=x1 - x0,
        labels=np.asarray(labels, dtype=np.int64),
    )
