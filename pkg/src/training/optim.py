"""
AdamW with bias correction, and the EMA shadow of the student weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Mapping

import numpy as np

from src.nets.layers import ParameterSet
from src.pipeline.errors import NumericalError, ShapeError
from src.training.config import OptimConfig


class AdamW:
    """Optimizer hyperparameters plus per-parameter moments and the step counter."""

    def __init__(self, config: OptimConfig, params: Mapping[str, np.ndarray]) -> None:
        self.config = config
        self.m: Dict[str, np.ndarray] = {name: np.zeros_like(p) for name, p in params.items()}
        self.v: Dict[str, np.ndarray] = {name: np.zeros_like(p) for name, p in params.items()}
        self.step = 0


def adamw_step(optim: AdamW, params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> ParameterSet:
    """
    One AdamW update. Moments and the step counter are advanced in place.

    Raises:
        ShapeError: If a parameter, gradient or moment shape disagrees
        NumericalError: If any gradient is non-finite (nothing is updated)
    """
    for name, p in params.items():
        if name not in grads or name not in optim.m:
            raise ShapeError(f"adamw_step: no gradient/moment for parameter '{name}'")
        if grads[name].shape != p.shape or optim.m[name].shape != p.shape:
            raise ShapeError(f"adamw_step: '{name}' parameter {p.shape} vs gradient {grads[name].shape}")
    for name in params:
        if not np.isfinite(grads[name]).all():
            raise NumericalError(f"Non-finite gradient for parameter '{name}'; step aborted")

    cfg = optim.config
    t = optim.step + 1
    bias1 = 1.0 - cfg.beta1 ** t
    bias2 = 1.0 - cfg.beta2 ** t
    updated: ParameterSet = {}
    for name, p in params.items():
        g = grads[name].astype(p.dtype, copy=False)
        m = cfg.beta1 * optim.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * optim.v[name] + (1.0 - cfg.beta2) * g * g
        optim.m[name] = m.astype(p.dtype, copy=False)
        optim.v[name] = v.astype(p.dtype, copy=False)
        base = p * (1.0 - cfg.learning_rate * cfg.weight_decay) if cfg.weight_decay else p
        step = cfg.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + cfg.eps)
        updated[name] = (base - step).astype(p.dtype, copy=False)
    optim.step = t
    return updated


@dataclass
class EmaState:
    shadow: ParameterSet
    decay: float = 0.9999

    @classmethod
    def track(cls, params: Mapping[str, np.ndarray], decay: float) -> "EmaState":
        return cls({name: np.array(p) for name, p in params.items()}, decay)


def ema_update(ema: EmaState, params: Mapping[str, np.ndarray]) -> ParameterSet:
    """shadow <- decay·shadow + (1 − decay)·params"""
    shadow: ParameterSet = {}
    for name, value in ema.shadow.items():
        if params[name].shape != value.shape:
            raise ShapeError(f"ema_update: '{name}' shadow {value.shape} vs parameter {params[name].shape}")
        mixed = ema.decay * value + (1.0 - ema.decay) * params[name]
        shadow[name] = mixed.astype(value.dtype, copy=False)
    ema.shadow = shadow
    return shadow
