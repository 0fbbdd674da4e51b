from __future__ import annotations

from typing import Tuple

import numpy as np

from src.nets.config import StudentConfig
from src.nets.layers import ParameterSet
from src.nets.projector import PROJECTOR_LAYERS, ProjectionHead
from src.nets.student import StudentNetwork

EMBED_SCALE = 0.02


def _dense(params: ParameterSet, rng: np.random.Generator, name: str, fan_in: int, fan_out: int) -> None:
    params[f"{name}.w"] = (rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)).astype(np.float32)
    params[f"{name}.b"] = np.zeros(fan_out, dtype=np.float32)


def _norm(params: ParameterSet, name: str, width: int) -> None:
    params[f"{name}.g"] = np.ones(width, dtype=np.float32)
    params[f"{name}.b"] = np.zeros(width, dtype=np.float32)


def init_params(config: StudentConfig, seed: int) -> Tuple[StudentNetwork, ProjectionHead]:
    """
    Seeded initialization of the student and the projection head.

    Linear weights are N(0, 1/fan_in), embeddings N(0, 0.02²), layer norms are
    identity and the student output head is zero so the first velocity is 0.
    """
    rng = np.random.default_rng(seed)
    d = config.d_model
    student: ParameterSet = {}

    _dense(student, rng, "token_embed", config.d_latent, d)
    student["pos_table"] = (EMBED_SCALE * rng.standard_normal((config.n_tokens, d))).astype(np.float32)
    _dense(student, rng, "time_mlp.0", 2 * config.time_freqs, d)
    _dense(student, rng, "time_mlp.1", d, d)
    student["class_table"] = (EMBED_SCALE * rng.standard_normal((config.n_classes + 1, d))).astype(np.float32)

    for index in range(1, config.depth + 1):
        name = f"blocks.{index}"
        _norm(student, f"{name}.ln1", d)
        for part in ("q", "k", "v", "out"):
            _dense(student, rng, f"{name}.attn.{part}", d, d)
        _norm(student, f"{name}.ln2", d)
        _dense(student, rng, f"{name}.mlp.fc1", d, config.mlp_ratio * d)
        _dense(student, rng, f"{name}.mlp.fc2", config.mlp_ratio * d, d)

    _norm(student, "final_ln", d)
    student["head.w"] = np.zeros((d, config.d_latent), dtype=np.float32)
    student["head.b"] = np.zeros(config.d_latent, dtype=np.float32)

    head: ParameterSet = {}
    widths = [d] * PROJECTOR_LAYERS + [config.d_teacher]
    for layer in range(PROJECTOR_LAYERS):
        _dense(head, rng, f"proj.{layer}", widths[layer], widths[layer + 1])

    return StudentNetwork(config, student), ProjectionHead(d, config.d_teacher, head)
