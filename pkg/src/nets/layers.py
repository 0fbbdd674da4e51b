"""
Building blocks shared by the student and the projection head.

Parameters live in plain ``{name: ndarray}`` dicts. A forward pass first binds
them to tensors: watched leaves when a tape is given (training, gradient
checks), constants otherwise (sampling, evaluation).
"""

from __future__ import annotations

from typing import Dict, Mapping, Optional

import numpy as np

from src.autodiff import functions as F
from src.autodiff.tensor import Tape, Tensor

ParameterSet = Dict[str, np.ndarray]
BoundParameters = Mapping[str, Tensor]


def bind(params: Mapping[str, np.ndarray], tape: Optional[Tape] = None) -> Dict[str, Tensor]:
    if tape is None:
        return {name: Tensor(value, name=name) for name, value in params.items()}
    return {name: tape.watch(value, name=name) for name, value in params.items()}


def dense(x: Tensor, bound: BoundParameters, name: str) -> Tensor:
    return F.linear(x, bound[f"{name}.w"], bound.get(f"{name}.b"))


def norm(x: Tensor, bound: BoundParameters, name: str) -> Tensor:
    return F.layer_norm(x, bound[f"{name}.g"], bound[f"{name}.b"])


def timestep_features(t: np.ndarray, n_freqs: int) -> np.ndarray:
    """Sinusoidal features of t in [0, 1], shape [B, 2*n_freqs]."""
    freqs = np.exp(-np.log(10000.0) * np.arange(n_freqs) / n_freqs)
    args = 1000.0 * np.asarray(t, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.cos(args), np.sin(args)], axis=-1)


def _split_heads(x: Tensor, heads: int) -> Tensor:
    b, n, d = x.shape
    return F.transpose(F.reshape(x, (b, n, heads, d // heads)), (0, 2, 1, 3))


def self_attention(h: Tensor, bound: BoundParameters, name: str, heads: int) -> Tensor:
    b, n, d = h.shape
    q = _split_heads(dense(h, bound, f"{name}.q"), heads)
    k = _split_heads(dense(h, bound, f"{name}.k"), heads)
    v = _split_heads(dense(h, bound, f"{name}.v"), heads)
    scores = F.scale(F.matmul(q, F.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(d // heads))
    mixed = F.matmul(F.row_softmax(scores, 1.0), v)
    merged = F.reshape(F.transpose(mixed, (0, 2, 1, 3)), (b, n, d))
    return dense(merged, bound, f"{name}.out")


def feed_forward(h: Tensor, bound: BoundParameters, name: str) -> Tensor:
    return dense(F.gelu(dense(h, bound, f"{name}.fc1")), bound, f"{name}.fc2")


def transformer_block(h: Tensor, bound: BoundParameters, name: str, heads: int) -> Tensor:
    """Pre-norm residual block: attention then feed-forward."""
    h = F.add(h, self_attention(norm(h, bound, f"{name}.ln1"), bound, f"{name}.attn", heads))
    return F.add(h, feed_forward(norm(h, bound, f"{name}.ln2"), bound, f"{name}.mlp"))
