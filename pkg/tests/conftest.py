"""
Shared fixtures: a tiny experiment config and one short training run that the
training, evaluation, sweep and CLI tests reuse.
"""

import copy
import json

import numpy as np
import pytest

from src.synth.config import DataConfig
from src.synth.render import render_dataset
from src.training.checkpoint import load_checkpoint
from src.training.config import TrainConfig
from src.training.trainer import train_loop

TINY_CONFIG = {
    "data": {"grid": 2, "patch": 2, "n_classes": 2, "n_images": 16, "seed": 0},
    "model": {
        "depth": 2,
        "d_model": 8,
        "heads": 2,
        "align_depth": 1,
        "mlp_ratio": 2,
        "time_freqs": 4,
        "d_teacher": 4,
    },
    "loss": {"lambda_proj": 1.0, "lambda_struc": 2.0, "variant": "mse"},
    "optim": {"learning_rate": 0.001, "ema_decay": 0.9},
    "train": {"batch_size": 4, "total_steps": 6, "log_every": 2, "checkpoint_every": 3, "out_dir": "runs/tiny"},
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_raw():
    """Deep copy of the tiny config dict, safe to mutate."""
    return copy.deepcopy(TINY_CONFIG)


@pytest.fixture
def tiny_config(tiny_raw):
    return TrainConfig.from_dict(tiny_raw)


@pytest.fixture
def tiny_config_path(tmp_path, tiny_raw):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_raw), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def trained_run(tmp_path_factory):
    """A finished 6-step run: its directory and the loaded final checkpoint."""
    run_dir = tmp_path_factory.mktemp("tiny_run")
    config = TrainConfig.from_dict(copy.deepcopy(TINY_CONFIG))
    train_loop(config, out_dir=run_dir)
    return run_dir, load_checkpoint(run_dir / "final.srpc")


@pytest.fixture(scope="session")
def holdout_set():
    return render_dataset(DataConfig(grid=2, patch=2, n_classes=2, n_images=6, seed=99))
