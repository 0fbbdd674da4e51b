"""
Training step and loop: flow matching plus point-wise and structural alignment.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.align.total import total_alignment_loss
from src.autodiff.tensor import Tape
from src.flow.interpolant import make_flow_batch
from src.flow.objective import fm_loss, total_training_loss
from src.nets.init import init_params
from src.nets.layers import ParameterSet, bind
from src.nets.projector import ProjectionHead, projector_forward
from src.nets.student import StudentNetwork, student_forward
from src.nets.teacher import TeacherEncoder, teacher_encode
from src.pipeline.errors import NumericalError
from src.pipeline.terminal_output import TerminalOutput, train_header
from src.pipeline.utils import ensure_dir
from src.synth.render import render_dataset
from src.training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from src.training.config import TrainConfig
from src.training.metrics import MetricsRow, MetricsWriter
from src.training.optim import AdamW, EmaState, adamw_step, ema_update
from src.training.rng import RandomStreams

logger = logging.getLogger(__name__)

Batch = Tuple[np.ndarray, np.ndarray]  # clean tokens [B, N, D], labels [B]

STUDENT_PREFIX = "student/"
HEAD_PREFIX = "head/"


def _joint(student: ParameterSet, head: ParameterSet) -> ParameterSet:
    joint = {STUDENT_PREFIX + k: v for k, v in student.items()}
    joint.update({HEAD_PREFIX + k: v for k, v in head.items()})
    return joint


def _split(joint: ParameterSet) -> Tuple[ParameterSet, ParameterSet]:
    student = {k[len(STUDENT_PREFIX):]: v for k, v in joint.items() if k.startswith(STUDENT_PREFIX)}
    head = {k[len(HEAD_PREFIX):]: v for k, v in joint.items() if k.startswith(HEAD_PREFIX)}
    return student, head


@dataclass
class TrainState:
    config: TrainConfig
    student: StudentNetwork
    head: ProjectionHead
    teacher: TeacherEncoder
    optimizer: AdamW
    ema: EmaState
    streams: RandomStreams
    step: int = 0

    @classmethod
    def fresh(cls, config: TrainConfig) -> "TrainState":
        student, head = init_params(config.model, config.train.seed)
        return cls(
            config=config,
            student=student,
            head=head,
            teacher=TeacherEncoder.from_config(config.model),
            optimizer=AdamW(config.optim, _joint(student.params, head.params)),
            ema=EmaState.track(student.params, config.optim.ema_decay),
            streams=RandomStreams(config.train.seed),
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TrainState":
        state = cls.fresh(ckpt.config)
        state.student = state.student.with_params(dict(ckpt.student))
        state.head.params = dict(ckpt.head)
        state.ema.shadow = dict(ckpt.ema)
        state.optimizer.m = dict(ckpt.adam_m)
        state.optimizer.v = dict(ckpt.adam_v)
        state.optimizer.step = ckpt.step
        state.streams.restore(ckpt.rng_state)
        state.step = ckpt.step
        return state

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(
            config=self.config,
            step=self.step,
            student=self.student.params,
            head=self.head.params,
            ema=self.ema.shadow,
            adam_m=self.optimizer.m,
            adam_v=self.optimizer.v,
            rng_state=self.streams.state(),
        )


def sample_batch(state: TrainState, tokens: np.ndarray, labels: np.ndarray) -> Batch:
    """Draw a batch (with replacement) from the data-order stream."""
    idx = state.streams.data_order.integers(0, tokens.shape[0], size=state.config.train.batch_size)
    return tokens[idx], labels[idx]


def _global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads.values())))


def train_step(state: TrainState, batch: Batch) -> MetricsRow:
    """
    One optimizer step on a batch of clean tokens.

    Raises:
        NumericalError: If a loss term or gradient becomes non-finite; the
            message names the term being computed
    """
    started = time.perf_counter()
    cfg = state.config
    x1, labels = batch
    flow = make_flow_batch(x1, labels, state.streams.noise, state.streams.time)
    dropped = state.streams.dropout.random(flow.labels.shape[0]) < cfg.train.label_dropout
    cond_labels = np.where(dropped, cfg.model.null_label, flow.labels)

    tape = Tape()
    bound_student = bind(state.student.params, tape)
    bound_head = bind(state.head.params, tape)
    term = "loss_fm"
    try:
        velocity, hidden = student_forward(state.student, flow.xt, flow.t, cond_labels, bound=bound_student)
        loss_fm = fm_loss(velocity, flow.x0, flow.x1)
        term = "alignment"
        h_t = teacher_encode(state.teacher, flow.x1)
        h_s = projector_forward(state.head, hidden, bound=bound_head, token_grid=h_t.token_grid)
        align = total_alignment_loss(h_t, h_s, cfg.loss)
        term = "loss_total"
        total = total_training_loss(loss_fm, align)
        term = "backward"
        grads = tape.backward(total)
    except NumericalError as err:
        raise NumericalError(f"Step {state.step + 1}: non-finite {term}: {err}") from err

    joint_grads = _joint(
        {name: grads.of(t) for name, t in bound_student.items()},
        {name: grads.of(t) for name, t in bound_head.items()},
    )
    grad_norm = _global_norm(joint_grads)
    updated = adamw_step(state.optimizer, _joint(state.student.params, state.head.params), joint_grads)
    student_params, head_params = _split(updated)
    state.student = state.student.with_params(student_params)
    state.head.params = head_params
    ema_update(state.ema, student_params)
    state.step += 1

    elapsed = int(round((time.perf_counter() - started) * 1000)) if cfg.train.record_wallclock else 0
    return MetricsRow(
        step=state.step,
        loss_fm=loss_fm.item(),
        loss_proj=align.loss_proj.item(),
        loss_struc=align.loss_struc.item(),
        loss_total=total.item(),
        grad_norm=grad_norm,
        wallclock_ms=elapsed,
    )


def train_loop(
    config: TrainConfig,
    out_dir: Optional[Union[str, Path]] = None,
    resume: Optional[Union[str, Path]] = None,
) -> Path:
    """
    Run ``train.total_steps`` steps, writing config.json, metrics.csv and checkpoints.

    Args:
        config: Experiment config (ignored in favour of the echo when resuming)
        out_dir: Run directory; defaults to ``train.out_dir``
        resume: Checkpoint to continue from

    Returns:
        The run directory
    """
    if resume is not None:
        ckpt = load_checkpoint(resume)
        if ckpt.config != config:
            logger.warning("Resuming with the checkpoint's config echo; the given config differs")
        state = TrainState.from_checkpoint(ckpt)
    else:
        state = TrainState.fresh(config)
    cfg = state.config

    run_dir = Path(out_dir if out_dir is not None else cfg.train.out_dir)
    ensure_dir(run_dir)
    cfg.save(run_dir / "config.json")
    metrics = MetricsWriter(run_dir / "metrics.csv")
    if resume is not None:
        metrics.truncate_after(state.step)
    else:
        metrics.reset()

    images = render_dataset(cfg.data, workers=cfg.train.workers)
    tokens, labels = images.tokens(), images.labels
    total_steps = cfg.train.total_steps

    train_header(f"{run_dir} ({cfg.loss.variant}, {total_steps} steps)")
    while state.step < total_steps:
        row = train_step(state, sample_batch(state, tokens, labels))
        metrics.append(row)
        if row.step % cfg.train.log_every == 0 or row.step == total_steps:
            TerminalOutput.print_progress(row.step, total_steps, prefix="  ")
            logger.debug("step %d loss_total %.6f grad_norm %.4f", row.step, row.loss_total, row.grad_norm)
        if cfg.train.checkpoint_every and row.step % cfg.train.checkpoint_every == 0:
            save_checkpoint(state.to_checkpoint(), run_dir / f"ckpt_{row.step:06d}.srpc")

    save_checkpoint(state.to_checkpoint(), run_dir / "final.srpc")
    TerminalOutput.complete(f"Finished at step {state.step}")
    return run_dir
