"""
Similarity-map export: one anchor token's cosine row, as a G×G gray image.
"""

from __future__ import annotations

from pathlib import Path
from typing import Tuple, Union

import numpy as np

from src.align.features import FeatureKind, FeatureMap
from src.align.losses import normalize
from src.autodiff.tensor import Tensor
from src.evaluation.gram_discrepancy import shared_noise
from src.evaluation.pgm import round_half_up, write_pgm
from src.flow.interpolant import interpolate
from src.nets.projector import projector_forward
from src.nets.student import student_forward
from src.nets.teacher import TeacherEncoder
from src.pipeline.errors import ShapeError
from src.synth.render import ImageSet
from src.training.checkpoint import Checkpoint, models_from_checkpoint


def cosine_row(features: np.ndarray, anchor: int) -> np.ndarray:
    """Cosine similarity of every token row to the anchor row, shape [N]."""
    features = np.asarray(features)
    if features.ndim != 2:
        raise ShapeError(f"cosine_row expects [N, D] features, got {features.shape}")
    if not 0 <= anchor < features.shape[0]:
        raise ShapeError(f"Anchor token {anchor} out of range [0, {features.shape[0]})")
    z = normalize(FeatureMap(Tensor(features), FeatureKind.TEACHER_RAW)).values.numpy()
    return z @ z[anchor]


def cosine_to_gray(cos: np.ndarray, anchor: int, grid: int) -> np.ndarray:
    """round((c + 1)·127.5) per cell, anchor cell forced to 255."""
    cos = np.asarray(cos, dtype=np.float64)
    if cos.shape != (grid * grid,):
        raise ShapeError(f"cosine_to_gray: expected {grid * grid} cosines, got {cos.shape}")
    gray = np.clip(round_half_up((cos + 1.0) * 127.5), 0, 255).astype(np.uint8)
    gray[anchor] = 255
    return gray.reshape(grid, grid)


def teacher_simmap(teacher: TeacherEncoder, tokens: np.ndarray, anchor: int) -> np.ndarray:
    """Teacher similarity map of one image's clean tokens [N, d_patch]."""
    return cosine_to_gray(cosine_row(teacher.features(tokens), anchor), anchor, teacher.grid)


def simmap_export(
    checkpoint: Checkpoint,
    eval_set: ImageSet,
    image_index: int,
    anchor_token: int,
    out_dir: Union[str, Path],
    t: float = 0.5,
    noise_seed: int = 0,
) -> Tuple[Path, Path]:
    """
    Write the teacher and student similarity maps of one image.

    The student map comes from the EMA student's tapped hidden state at time
    ``t`` (noise seeded by ``noise_seed``), passed through the projection head.

    Returns:
        (teacher map path, student map path)

    Raises:
        ShapeError: If the image index or anchor token is out of range
    """
    image = eval_set.image(image_index)
    student, head, teacher = models_from_checkpoint(checkpoint, use_ema=True)
    n_tokens = teacher.grid * teacher.grid
    if not 0 <= anchor_token < n_tokens:
        raise ShapeError(f"Anchor token {anchor_token} out of range [0, {n_tokens})")

    tokens = image.tokens.astype(np.float32)[None]
    t_vec = np.full(1, t, dtype=np.float32)
    xt = interpolate(shared_noise(tokens, noise_seed), tokens, t_vec)
    _, hidden = student_forward(student, xt, t_vec, np.array([image.label], dtype=np.int64))
    student_features = projector_forward(head, hidden).values.numpy()[0]

    out_dir = Path(out_dir)
    stem = f"img{image_index:05d}_tok{anchor_token:03d}"
    teacher_path = write_pgm(out_dir / f"simmap_teacher_{stem}.pgm", teacher_simmap(teacher, tokens[0], anchor_token))
    student_path = write_pgm(
        out_dir / f"simmap_student_{stem}.pgm",
        cosine_to_gray(cosine_row(student_features, anchor_token), anchor_token, teacher.grid),
    )
    return teacher_path, student_path
