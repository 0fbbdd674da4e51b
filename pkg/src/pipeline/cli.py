"""
Command-line surface of the lab.

Run with:
    python3 -m src.pipeline.cli <command> [options]

Exit codes: 0 success, 1 check failure, 2 config/usage error, 3 I/O error,
4 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.evaluation.pgm import tile, unit_to_gray, write_pgm
from src.evaluation.report import EvalSettings, evaluate_checkpoint
from src.evaluation.simmap import simmap_export
from src.flow.sampler import SamplerConfig, euler_sample
from src.pipeline.errors import CheckFailure, ConfigError, LabError, ShapeError
from src.pipeline.gradcheck_suite import SuiteSettings, run_suite
from src.pipeline.orchestrator import Orchestrator
from src.pipeline.sweep import SweepGrid, SweepRunner, SweepSettings
from src.pipeline.terminal_output import TerminalOutput
from src.pipeline.utils import load_settings, settings_section, setup_logger
from src.plotting.plot_factory import RunPlotterFactory
from src.synth.dataset_io import read_dataset, write_dataset
from src.synth.patchify import unpatchify
from src.synth.render import render_dataset
from src.training.checkpoint import load_checkpoint, models_from_checkpoint
from src.training.config import TrainConfig
from src.training.trainer import train_loop

logger = logging.getLogger(__name__)

Settings = Dict[str, Any]


# ============================================================
# Commands
# ============================================================

def cmd_gen_data(args: argparse.Namespace, settings: Settings) -> int:
    config = TrainConfig.load(args.config)
    data = config.data
    if args.seed_offset:
        data = replace(data, seed=data.seed + args.seed_offset)
    path = write_dataset(render_dataset(data, workers=config.train.workers), args.out)
    TerminalOutput.summary("dataset", str(path))
    TerminalOutput.summary("images", data.n_images)
    return 0


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    if args.config is None and args.resume is None:
        raise ConfigError("train needs --config or --resume")
    config = TrainConfig.load(args.config) if args.config is not None else None
    if config is None:
        config = load_checkpoint(args.resume).config
    run_dir = train_loop(config, out_dir=args.out_dir, resume=args.resume)
    TerminalOutput.summary("run directory", str(run_dir))
    return 0


def cmd_sample(args: argparse.Namespace, settings: Settings) -> int:
    ckpt = load_checkpoint(args.ckpt)
    student, _, _ = models_from_checkpoint(ckpt, use_ema=True)
    cfg = student.config
    if not 0 <= args.class_id < cfg.n_classes:
        raise ShapeError(f"--class must lie in [0, {cfg.n_classes}), got {args.class_id}")
    if args.n < 1:
        raise ShapeError(f"--n must be >= 1, got {args.n}")
    defaults = settings_section(settings, "sampler")
    sampler = SamplerConfig(
        steps=args.steps if args.steps is not None else int(defaults.get("steps", 50)),
        cfg_scale=args.cfg_scale if args.cfg_scale is not None else float(defaults.get("cfg_scale", 1.0)),
        seed=args.seed if args.seed is not None else int(defaults.get("seed", 0)),
    )
    labels = np.full(args.n, args.class_id, dtype=np.int64)
    tokens = euler_sample(
        student, labels, sampler, token_shape=(cfg.n_tokens, cfg.d_latent), null_label=cfg.null_label
    )
    data = ckpt.config.data
    images = [unit_to_gray(img) for img in unpatchify(tokens, data.grid, data.patch)]

    out_dir = Path(args.out)
    for index, image in enumerate(images):
        write_pgm(out_dir / f"sample_{index:03d}.pgm", image)
    grid_path = write_pgm(out_dir / "grid.pgm", tile(images, int(np.ceil(np.sqrt(len(images))))))
    TerminalOutput.summary("samples", f"{len(images)} -> {grid_path}")
    return 0


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    ckpt = load_checkpoint(args.ckpt)
    eval_set = read_dataset(args.data)
    out = Path(args.out)
    artifact_dir = args.artifact_dir or out.parent / f"{out.stem}_samples"
    report = evaluate_checkpoint(
        ckpt,
        eval_set,
        EvalSettings.from_settings(settings_section(settings, "eval")),
        data_label=args.label or Path(args.data).stem,
        artifact_dir=artifact_dir,
        artifact_prefix="samples",
    )
    report.write(out)
    TerminalOutput.summary("report", str(out))
    return 0


def cmd_gradcheck(args: argparse.Namespace, settings: Settings) -> int:
    suite = SuiteSettings.from_settings(settings_section(settings, "gradcheck"))
    if args.tol is not None:
        suite = replace(suite, tol=args.tol)
    table = run_suite(seed=args.seed, settings=suite)
    print(table[["op", "max_rel_error", "passed"]].to_string(index=False, float_format=lambda v: f"{v:.3e}"))
    failed = table.loc[~table["passed"], "op"].tolist()
    if failed:
        raise CheckFailure(f"{len(failed)} gradient check(s) failed at tol {suite.tol:g}: {failed}")
    TerminalOutput.complete(f"All {len(table)} gradient checks passed at tol {suite.tol:g}")
    return 0


def cmd_simmap(args: argparse.Namespace, settings: Settings) -> int:
    eval_cfg = EvalSettings.from_settings(settings_section(settings, "eval"))
    teacher_map, student_map = simmap_export(
        load_checkpoint(args.ckpt),
        read_dataset(args.data),
        image_index=args.image_index,
        anchor_token=args.anchor,
        out_dir=args.out_dir,
        t=args.t if args.t is not None else eval_cfg.simmap_t,
        noise_seed=eval_cfg.noise_seed,
    )
    TerminalOutput.summary("teacher map", str(teacher_map))
    TerminalOutput.summary("student map", str(student_map))
    return 0


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    grid = SweepGrid.load(args.grid, args.base, args.out)
    runner = SweepRunner(
        grid,
        SweepSettings.from_settings(settings_section(settings, "sweep")),
        EvalSettings.from_settings(settings_section(settings, "eval")),
    )
    table = runner.run()
    failed = int((table["error"] != "").sum())
    if failed:
        raise CheckFailure(f"{failed} of {len(table)} sweep cell(s) failed; see {args.out}")
    return 0


def cmd_plot(args: argparse.Namespace, settings: Settings) -> int:
    plotter = RunPlotterFactory().create_plotter(args.kind, args.input)
    TerminalOutput.summary("plot", str(plotter.plot(args.out)))
    return 0


def cmd_pipeline(args: argparse.Namespace, settings: Settings) -> int:
    out_dir = args.out_dir
    if out_dir is None:
        out_dir = Path(settings_section(settings, "paths").get("runs", "runs")) / Path(args.config).stem
    artifacts = Orchestrator(args.config, out_dir=out_dir, settings=settings).run()
    for name, path in artifacts.items():
        TerminalOutput.summary(name, str(path), indent=1)
    return 0


# ============================================================
# Parser
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python3 -m src.pipeline.cli", description=__doc__.split("\n\n")[0])
    parser.add_argument("--settings", type=Path, default=None, help="Lab settings YAML")
    parser.add_argument("--log-level", default=None, help="Overrides logging.level from the settings")
    parser.add_argument("--quiet", action="store_true", help="Disable progress output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Render a synthetic dataset file")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed-offset", type=int, default=0, help="Added to data.seed (held-out sets)")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train", help="Train (or resume) a run")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--resume", type=Path, default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("sample", help="Generate images from a checkpoint")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--class", dest="class_id", type=int, default=0)
    p.add_argument("--cfg-scale", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, type=Path, help="Output directory")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("eval", help="Write an evaluation report")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--label", default=None, help="Data label stored in the report")
    p.add_argument("--artifact-dir", type=Path, default=None,
                   help="Directory for per-class sample grids (default: <out stem>_samples next to --out)")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("gradcheck", help="Run the gradient-check suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("simmap", help="Export teacher/student similarity maps")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--image-index", type=int, default=0)
    p.add_argument("--anchor", type=int, default=0)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--t", type=float, default=None)
    p.set_defaults(handler=cmd_simmap)

    p = sub.add_parser("sweep", help="Run an ablation grid")
    p.add_argument("--base", required=True, type=Path)
    p.add_argument("--grid", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("plot", help="Plot training curves or sweep results")
    p.add_argument("--kind", required=True, choices=RunPlotterFactory().available())
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("pipeline", help="Held-out data, train, evaluate, maps and curves in one go")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out-dir", default=None, type=Path)
    p.set_defaults(handler=cmd_pipeline)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log = setup_logger()
    try:
        settings = load_settings(args.settings)
        level = str(args.log_level or settings_section(settings, "logging").get("level", "INFO")).upper()
        try:
            log.setLevel(level)
        except ValueError as err:
            raise ConfigError(f"Unknown log level: {level}") from err
        TerminalOutput.enabled = bool(settings_section(settings, "runtime").get("progress", True)) and not args.quiet
        handler: Callable[[argparse.Namespace, Settings], int] = args.handler
        return handler(args, settings)
    except LabError as err:
        logger.error("%s: %s", type(err).__name__, err)
        return err.exit_code
    except OSError as err:
        logger.error("I/O error: %s", err)
        return 3


if __name__ == "__main__":
    sys.exit(main())
