"""
Bar charts of an ablation sweep's final metrics, one bar group per cell.
"""

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from src.plotting.base_plotter import RunPlotter

METRIC_COLUMNS = ("gram_discrepancy", "frechet", "loss_total")


def cell_label(row: pd.Series, keys) -> str:
    if not keys:
        return "base"
    return ", ".join(f"{k.split('.')[-1]}={row[k]}" for k in keys)


class SweepBarPlotter(RunPlotter):
    """One panel per metric; failed cells (non-empty ``error``) are left out."""

    required_columns = METRIC_COLUMNS + ("error",)

    def draw(self, data: pd.DataFrame) -> plt.Figure:
        keys = [c for c in data.columns if c not in METRIC_COLUMNS + ("error",)]
        ok = data[data["error"].isna() | (data["error"].astype(str) == "")]
        if len(ok) < len(data):
            self.log.warning("Skipping %d failed sweep cell(s)", len(data) - len(ok))
        labels = [cell_label(row, keys) for _, row in ok.iterrows()]
        positions = np.arange(len(ok))

        fig, axes = plt.subplots(1, len(METRIC_COLUMNS), figsize=(5 * len(METRIC_COLUMNS), 4 + 0.15 * len(ok)))
        for ax, metric in zip(axes, METRIC_COLUMNS):
            ax.barh(positions, ok[metric].astype(float), color="steelblue")
            ax.set_yticks(positions)
            ax.set_yticklabels(labels if ax is axes[0] else [], fontsize=8)
            ax.set_title(metric, fontsize=12)
            ax.invert_yaxis()
            ax.grid(True, axis="x", alpha=0.3)
        fig.suptitle(f"Sweep: {self.input_path.stem}", fontsize=14, fontweight="bold")
        plt.tight_layout()
        return fig
