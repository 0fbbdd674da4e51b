"""
Ablation sweeps: train one run per grid cell and collect the final metrics.

A grid file is YAML with ``axes`` (key-path -> value list, expanded as a
Cartesian product) and/or ``cells`` (explicit override rows). Cells that come
out identical are kept once, in first-seen order.

Example (the temperature analysis):
    cells:
      - {loss.tau_t: 0.2, loss.tau_s: 0.15}
      - {loss.tau_t: 0.1, loss.tau_s: 0.1}
"""

from __future__ import annotations

import copy
import itertools
import json
import logging
import math
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import pandas as pd
import yaml

from src.evaluation.report import EvalSettings, evaluate_checkpoint
from src.pipeline.errors import ConfigError, LabError
from src.pipeline.terminal_output import TerminalOutput, sweep_header
from src.pipeline.utils import ensure_dir
from src.synth.config import DataConfig
from src.synth.render import ImageSet, render_dataset
from src.training.checkpoint import load_checkpoint
from src.training.config import TrainConfig
from src.training.metrics import FLOAT_FORMAT, read_metrics
from src.training.trainer import train_loop

logger = logging.getLogger(__name__)

Cell = Dict[str, Any]
RESULT_COLUMNS = ["gram_discrepancy", "frechet", "loss_total", "error"]


@dataclass(frozen=True)
class SweepSettings:
    """The ``sweep`` section of the lab settings."""

    max_cells: int = 512
    holdout_images: int = 256
    holdout_seed_offset: int = 1_000_003

    @classmethod
    def from_settings(cls, section: Optional[Mapping[str, Any]]) -> "SweepSettings":
        section = dict(section or {})
        unknown = sorted(set(section) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"Unknown sweep settings: {unknown}")
        return cls(**section)


# ============================================================
# Key paths
# ============================================================

def _lookup(tree: Mapping[str, Any], key_path: str) -> Tuple[Dict[str, Any], str]:
    parts = key_path.split(".")
    node: Any = tree
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"Sweep key '{key_path}' does not resolve in the base config")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"Sweep key '{key_path}' does not resolve in the base config")
    return node, parts[-1]


def apply_overrides(base: Mapping[str, Any], cell: Cell) -> Dict[str, Any]:
    """Deep-copied config dict with each key-path in ``cell`` replaced."""
    tree = copy.deepcopy(dict(base))
    for key_path, value in cell.items():
        node, leaf = _lookup(tree, key_path)
        node[leaf] = value
    return tree


# ============================================================
# Grid
# ============================================================

@dataclass(frozen=True)
class SweepGrid:
    base_path: Path
    axes: Dict[str, List[Any]]
    cells: Tuple[Cell, ...]
    out_path: Path

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_path, out_path) -> "SweepGrid":
        raw = raw or {}
        if not isinstance(raw, Mapping):
            raise ConfigError(f"Sweep grid must be a mapping, got {type(raw).__name__}")
        unknown = sorted(set(raw) - {"axes", "cells"})
        if unknown:
            raise ConfigError(f"Unknown sweep grid key(s): {unknown}. Allowed: ['axes', 'cells']")
        axes = raw.get("axes") or {}
        cells = raw.get("cells") or []
        if not isinstance(axes, Mapping) or not all(isinstance(v, list) and v for v in axes.values()):
            raise ConfigError("Sweep 'axes' must map key-paths to nonempty value lists")
        if not isinstance(cells, list) or not all(isinstance(c, Mapping) for c in cells):
            raise ConfigError("Sweep 'cells' must be a list of key-path -> value mappings")
        return cls(Path(base_path), {str(k): list(v) for k, v in axes.items()},
                   tuple(dict(c) for c in cells), Path(out_path))

    @classmethod
    def load(cls, grid_path, base_path, out_path) -> "SweepGrid":
        grid_path = Path(grid_path)
        try:
            raw = yaml.safe_load(grid_path.read_text(encoding="utf-8"))
        except FileNotFoundError as err:
            raise ConfigError(f"Sweep grid not found: {grid_path}") from err
        except yaml.YAMLError as err:
            raise ConfigError(f"Failed to parse sweep grid {grid_path}: {err}") from err
        return cls.from_dict(raw, base_path, out_path)

    def expand(self, max_cells: int = 512) -> List[Cell]:
        """
        Axis product followed by the explicit cells, de-duplicated in order.

        With neither axes nor cells the single empty override (the base config)
        is returned.
        """
        size = math.prod(len(v) for v in self.axes.values()) if self.axes else 0
        if size + len(self.cells) > max_cells:
            raise ConfigError(f"Sweep grid has {size + len(self.cells)} cells; the limit is {max_cells}")
        product: List[Cell] = []
        if self.axes:
            keys = list(self.axes)
            product = [dict(zip(keys, combo)) for combo in itertools.product(*self.axes.values())]
        cells = product + [dict(c) for c in self.cells]
        if not cells:
            return [{}]
        unique: List[Cell] = []
        seen = set()
        for cell in cells:
            key = json.dumps(cell, sort_keys=True)
            if key not in seen:
                seen.add(key)
                unique.append(cell)
        return unique

    def varied_keys(self, cells: List[Cell]) -> List[str]:
        keys: List[str] = []
        for cell in cells:
            keys.extend(k for k in cell if k not in keys)
        return keys


# ============================================================
# Running
# ============================================================

def holdout_config(data: DataConfig, settings: SweepSettings) -> DataConfig:
    return replace(data, n_images=settings.holdout_images, seed=data.seed + settings.holdout_seed_offset)


class SweepRunner:
    """Runs every cell of a grid sequentially, flushing one CSV row per cell."""

    def __init__(self, grid: SweepGrid, sweep: SweepSettings, evaluation: EvalSettings) -> None:
        self.grid = grid
        self.sweep = sweep
        self.evaluation = evaluation
        self._holdout: Dict[DataConfig, ImageSet] = {}

    def _holdout_set(self, data: DataConfig) -> ImageSet:
        key = holdout_config(data, self.sweep)
        if key not in self._holdout:
            self._holdout[key] = render_dataset(key)
        return self._holdout[key]

    def _run_cell(self, base: Dict[str, Any], cell: Cell) -> Dict[str, Any]:
        config = TrainConfig.from_dict(apply_overrides(base, cell))
        with tempfile.TemporaryDirectory(prefix="sweep_cell_") as tmp:
            run_dir = train_loop(config, out_dir=tmp)
            ckpt = load_checkpoint(run_dir / "final.srpc")
            metrics_path = run_dir / "metrics.csv"
            metrics = read_metrics(metrics_path) if metrics_path.exists() else pd.DataFrame(columns=["loss_total"])
            report = evaluate_checkpoint(ckpt, self._holdout_set(config.data), self.evaluation, data_label="held-out")
        loss_total = float(metrics["loss_total"].iloc[-1]) if len(metrics) else math.nan
        return {"gram_discrepancy": report.gram_discrepancy, "frechet": report.frechet,
                "loss_total": loss_total, "error": ""}

    def _write_row(self, row: Dict[str, Any], columns: List[str], first: bool) -> None:
        pd.DataFrame([row], columns=columns).to_csv(
            self.grid.out_path,
            mode="w" if first else "a",
            header=first,
            index=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
        )

    def run(self) -> pd.DataFrame:
        """
        Train and evaluate every cell.

        A cell that raises gets an error row (metrics left empty) and the sweep
        moves on; unexpected exceptions are logged with their traceback.

        Returns:
            The full result table, also written to ``grid.out_path``
        """
        base = TrainConfig.load(self.grid.base_path).to_dict()
        cells = self.grid.expand(self.sweep.max_cells)
        for cell in cells:
            _lookup_all(base, cell)
        keys = self.grid.varied_keys(cells)
        columns = keys + RESULT_COLUMNS
        ensure_dir(self.grid.out_path.parent)

        sweep_header(f"{len(cells)} cell(s) from {self.grid.base_path.name}")
        rows = []
        for index, cell in enumerate(cells):
            TerminalOutput.info(f"cell {index + 1}/{len(cells)}: {json.dumps(cell, sort_keys=True)}", indent=1)
            try:
                results = self._run_cell(base, cell)
            except LabError as err:
                logger.error("Sweep cell %d failed: %s", index + 1, err)
                results = _error_results(err)
            except Exception as err:
                logger.exception("Sweep cell %d crashed", index + 1)
                results = _error_results(err)
            row = {key: cell.get(key) for key in keys}
            row.update(results)
            self._write_row(row, columns, first=index == 0)
            rows.append(row)
        TerminalOutput.complete(f"Wrote {len(rows)} row(s) to {self.grid.out_path}")
        return pd.DataFrame(rows, columns=columns)


def _error_results(err: Exception) -> Dict[str, Any]:
    return {"gram_discrepancy": math.nan, "frechet": math.nan, "loss_total": math.nan,
            "error": f"{type(err).__name__}: {err}"}


def _lookup_all(base: Mapping[str, Any], cell: Cell) -> None:
    for key_path in cell:
        _lookup(base, key_path)
