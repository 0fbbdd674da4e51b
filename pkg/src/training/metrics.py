"""
Per-step metrics and the incremental metrics.csv writer.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Union

import pandas as pd

from src.pipeline.utils import ensure_dir

METRICS_COLUMNS: List[str] = [
    "step",
    "loss_fm",
    "loss_proj",
    "loss_struc",
    "loss_total",
    "grad_norm",
    "wallclock_ms",
]
FLOAT_FORMAT = "%.9g"


@dataclass(frozen=True)
class MetricsRow:
    step: int
    loss_fm: float
    loss_proj: float
    loss_struc: float
    loss_total: float
    grad_norm: float
    wallclock_ms: int


class MetricsWriter:
    """Appends one row per step and flushes it to disk immediately."""

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)
        ensure_dir(self.path.parent)

    def reset(self) -> None:
        if self.path.exists():
            self.path.unlink()

    def truncate_after(self, step: int) -> None:
        """Drop rows with step > ``step`` (used when resuming into the same run)."""
        if not self.path.exists():
            return
        lines = self.path.read_text(encoding="utf-8").splitlines(keepends=True)
        kept = lines[:1] + [line for line in lines[1:] if int(line.split(",", 1)[0]) <= step]
        self.path.write_text("".join(kept), encoding="utf-8")

    def append(self, row: MetricsRow) -> None:
        frame = pd.DataFrame([asdict(row)], columns=METRICS_COLUMNS)
        frame.to_csv(
            self.path,
            mode="a",
            header=not self.path.exists(),
            index=False,
            float_format=FLOAT_FORMAT,
            lineterminator="\n",
        )


def read_metrics(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)
