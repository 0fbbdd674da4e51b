'''
Orchestrates one complete experiment in a single run directory.

Orchestrator class is created and run in run_pipeline.py and by
``python3 -m src.pipeline.cli pipeline``.
'''

from pathlib import Path
from typing import Any, Dict, Optional, Union
import logging

from src.evaluation.report import EvalSettings, evaluate_checkpoint
from src.evaluation.simmap import simmap_export
from src.pipeline.sweep import SweepSettings, holdout_config
from src.pipeline.terminal_output import TerminalOutput
from src.pipeline.utils import ensure_dir, load_settings, settings_section
from src.plotting.plot_factory import RunPlotterFactory
from src.synth.dataset_io import read_dataset, write_dataset
from src.synth.render import render_dataset
from src.training.checkpoint import load_checkpoint
from src.training.config import TrainConfig
from src.training.trainer import train_loop

logger = logging.getLogger(__name__)


class Orchestrator:
    def __init__(
        self,
        config_path: Union[str, Path],
        out_dir: Optional[Union[str, Path]] = None,
        settings: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.config_path = Path(config_path)
        self.config = TrainConfig.load(self.config_path)
        self.settings = settings if settings is not None else load_settings()
        self.out_dir = Path(out_dir) if out_dir is not None else Path(self.config.train.out_dir)

    def run(self) -> Dict[str, Path]:
        """
        Held-out data -> train -> evaluate -> similarity maps -> curves.

        Returns:
            Mapping of artifact name to path
        """
        ensure_dir(self.out_dir)
        eval_settings = EvalSettings.from_settings(settings_section(self.settings, "eval"))
        sweep_settings = SweepSettings.from_settings(settings_section(self.settings, "sweep"))
        simmap_cfg = settings_section(self.settings, "simmap")
        artifacts: Dict[str, Path] = {}

        # ============================================================
        # HELD-OUT DATA (same generator, offset seed)
        # ============================================================
        holdout = holdout_config(self.config.data, sweep_settings)
        artifacts["holdout"] = write_dataset(render_dataset(holdout), self.out_dir / "holdout.srpd")

        # ============================================================
        # TRAIN (config echo, metrics.csv, checkpoints)
        # ============================================================
        run_dir = train_loop(self.config, out_dir=self.out_dir)
        artifacts["checkpoint"] = run_dir / "final.srpc"
        artifacts["metrics"] = run_dir / "metrics.csv"

        # ============================================================
        # EVALUATE (teacher-space Fréchet + Gram discrepancy)
        # ============================================================
        ckpt = load_checkpoint(artifacts["checkpoint"])
        eval_set = read_dataset(artifacts["holdout"])
        report = evaluate_checkpoint(
            ckpt, eval_set, eval_settings, data_label="held-out", artifact_dir=run_dir, artifact_prefix="samples"
        )
        artifacts["report"] = report.write(run_dir / "eval.json")

        # ============================================================
        # SIMILARITY MAPS
        # ============================================================
        teacher_map, student_map = simmap_export(
            ckpt,
            eval_set,
            image_index=int(simmap_cfg.get("image_index", 0)),
            anchor_token=int(simmap_cfg.get("anchor", 0)),
            out_dir=run_dir / "simmaps",
            t=eval_settings.simmap_t,
            noise_seed=eval_settings.noise_seed,
        )
        artifacts["simmap_teacher"] = teacher_map
        artifacts["simmap_student"] = student_map

        # ============================================================
        # PLOT
        # ============================================================
        if artifacts["metrics"].exists():
            plotter = RunPlotterFactory().create_plotter("metrics", artifacts["metrics"])
            artifacts["curves"] = plotter.plot(run_dir / "curves.png")

        TerminalOutput.complete(f"Pipeline finished: {run_dir}")
        return artifacts
