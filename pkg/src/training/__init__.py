"""
Training harness: config, optimizer, EMA, checkpoints and metrics.
"""

from src.training.checkpoint import Checkpoint, load_checkpoint, models_from_checkpoint, save_checkpoint
from src.training.config import OptimConfig, TrainConfig, TrainSection
from src.training.metrics import METRICS_COLUMNS, MetricsRow, MetricsWriter, read_metrics
from src.training.optim import AdamW, EmaState, adamw_step, ema_update
from src.training.rng import RandomStreams
from src.training.trainer import TrainState, sample_batch, train_loop, train_step

__all__ = [
    'AdamW',
    'Checkpoint',
    'EmaState',
    'METRICS_COLUMNS',
    'MetricsRow',
    'MetricsWriter',
    'OptimConfig',
    'RandomStreams',
    'TrainConfig',
    'TrainSection',
    'TrainState',
    'adamw_step',
    'ema_update',
    'load_checkpoint',
    'models_from_checkpoint',
    'read_metrics',
    'sample_batch',
    'save_checkpoint',
    'train_loop',
    'train_step',
]
