"""
Checkpoint evaluation: teacher-space Fréchet of generated samples, Gram
discrepancy, per-class sample grids, and the JSON report that carries them.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from src.evaluation.frechet import feature_stats, frechet_distance, teacher_descriptors
from src.evaluation.gram_discrepancy import T_GRID, gram_discrepancy
from src.evaluation.pgm import tile, unit_to_gray, write_pgm
from src.flow.sampler import SamplerConfig, euler_sample
from src.pipeline.errors import ConfigError, ShapeError
from src.pipeline.terminal_output import TerminalOutput, eval_header
from src.pipeline.utils import ensure_dir
from src.synth.patchify import unpatchify
from src.synth.render import ImageSet
from src.training.checkpoint import Checkpoint, models_from_checkpoint

logger = logging.getLogger(__name__)

FEATURE_SPACE = "teacher"


@dataclass(frozen=True)
class EvalSettings:
    """The ``eval`` section of the lab settings."""

    t_grid: Tuple[float, ...] = T_GRID
    noise_seed: int = 0
    n_generated: int = 256
    sampler_steps: int = 50
    cfg_scale: float = 1.325
    sampler_seed: int = 0
    simmap_t: float = 0.5
    batch_size: int = 256
    sample_grids: bool = True

    @classmethod
    def from_settings(cls, section: Optional[Mapping[str, Any]]) -> "EvalSettings":
        section = dict(section or {})
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(section) - known)
        if unknown:
            raise ConfigError(f"Unknown eval settings: {unknown}")
        if "t_grid" in section:
            section["t_grid"] = tuple(float(t) for t in section["t_grid"])
        settings = cls(**section)
        if settings.n_generated < 2:
            raise ConfigError(f"eval.n_generated must be >= 2, got {settings.n_generated}")
        if settings.batch_size < 1:
            raise ConfigError(f"eval.batch_size must be >= 1, got {settings.batch_size}")
        return settings

    @property
    def sampler(self) -> SamplerConfig:
        return SamplerConfig(steps=self.sampler_steps, cfg_scale=self.cfg_scale, seed=self.sampler_seed)


@dataclass(frozen=True)
class EvalReport:
    frechet: float
    gram_discrepancy: float
    config_echo: Dict[str, Any]
    data_label: str = ""
    artifacts: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not (self.frechet >= 0 and self.gram_discrepancy >= 0):
            raise ShapeError(
                f"Evaluation metrics must be nonnegative, got frechet={self.frechet}, "
                f"gram_discrepancy={self.gram_discrepancy}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "frechet": self.frechet,
            "gram_discrepancy": self.gram_discrepancy,
            "feature_space": FEATURE_SPACE,
            "config_echo": self.config_echo,
            "data": self.data_label,
            "artifacts": list(self.artifacts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        ensure_dir(path.parent)
        path.write_text(self.to_json(), encoding="utf-8")
        return path


def generation_labels(eval_set: ImageSet, n: int) -> np.ndarray:
    """Class ids for n generated chains, cycling through the evaluation labels."""
    return np.resize(eval_set.labels, n).astype(np.int64)


def generate_tokens(checkpoint: Checkpoint, labels: np.ndarray, sampler: SamplerConfig) -> np.ndarray:
    """Euler + guidance samples from the EMA student, [n, N, d_patch]."""
    student, _, _ = models_from_checkpoint(checkpoint, use_ema=True)
    cfg = student.config
    return euler_sample(
        student, labels, sampler, token_shape=(cfg.n_tokens, cfg.d_latent), null_label=cfg.null_label
    )


def generated_frechet(
    checkpoint: Checkpoint,
    eval_set: ImageSet,
    settings: EvalSettings,
    samples: Optional[np.ndarray] = None,
) -> float:
    """Teacher-space Fréchet distance between generated samples and the evaluation set."""
    _, _, teacher = models_from_checkpoint(checkpoint)
    if samples is None:
        samples = generate_tokens(checkpoint, generation_labels(eval_set, settings.n_generated), settings.sampler)
    real = feature_stats(teacher_descriptors(teacher, eval_set.tokens()))
    fake = feature_stats(teacher_descriptors(teacher, samples))
    return frechet_distance(fake, real)


def write_sample_grids(
    samples: np.ndarray, labels: np.ndarray, grid: int, patch: int, out_dir: Path, prefix: str
) -> List[str]:
    """One tiled PGM per class present in ``labels``."""
    pixels = unpatchify(samples, grid, patch)
    paths = []
    for cls in np.unique(labels):
        images = [unit_to_gray(img) for img in pixels[labels == cls]]
        columns = int(np.ceil(np.sqrt(len(images))))
        path = write_pgm(out_dir / f"{prefix}_class{int(cls)}.pgm", tile(images, columns))
        paths.append(str(path))
    return paths


def evaluate_checkpoint(
    checkpoint: Checkpoint,
    eval_set: ImageSet,
    settings: EvalSettings,
    data_label: str = "",
    artifact_dir: Optional[Union[str, Path]] = None,
    artifact_prefix: str = "samples",
) -> EvalReport:
    """
    Compute both metrics on one evaluation set.

    Args:
        checkpoint: Loaded checkpoint (EMA student is used)
        eval_set: Images to compare against
        settings: Evaluation protocol
        data_label: Free-text label for the data source, echoed in the report
        artifact_dir: Where per-class sample grids go; None skips them
        artifact_prefix: File-name prefix of the sample grids
    """
    model_cfg = checkpoint.config.model
    if (eval_set.grid * eval_set.grid, eval_set.patch * eval_set.patch) != (model_cfg.n_tokens, model_cfg.d_latent):
        raise ShapeError(
            f"Evaluation data (G={eval_set.grid}, P={eval_set.patch}) does not match the model "
            f"({model_cfg.n_tokens} tokens of width {model_cfg.d_latent})"
        )
    eval_header(f"{len(eval_set)} images ({data_label or 'unlabeled'}), feature space: {FEATURE_SPACE}")

    labels = generation_labels(eval_set, settings.n_generated)
    samples = generate_tokens(checkpoint, labels, settings.sampler)
    frechet = generated_frechet(checkpoint, eval_set, settings, samples=samples)
    gram = gram_discrepancy(
        checkpoint, eval_set, settings.t_grid, noise_seed=settings.noise_seed, batch_size=settings.batch_size
    )

    artifacts: List[str] = []
    if artifact_dir is not None and settings.sample_grids:
        artifacts = write_sample_grids(
            samples, labels, eval_set.grid, eval_set.patch, Path(artifact_dir), artifact_prefix
        )

    TerminalOutput.summary("frechet", frechet, indent=1)
    TerminalOutput.summary("gram_discrepancy", gram, indent=1)
    logger.info("Evaluated step %d: frechet %.6g, gram_discrepancy %.6g", checkpoint.step, frechet, gram)
    return EvalReport(
        frechet=frechet,
        gram_discrepancy=gram,
        config_echo=checkpoint.config.to_dict(),
        data_label=data_label,
        artifacts=artifacts,
    )
