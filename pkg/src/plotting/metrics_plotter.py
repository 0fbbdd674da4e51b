"""
Training curves from a run's metrics.csv.
"""

from pathlib import Path
from typing import Union

import matplotlib.pyplot as plt
import pandas as pd

from src.plotting.base_plotter import RunPlotter

LOSS_COLUMNS = ("loss_total", "loss_fm", "loss_proj", "loss_struc")


class MetricsCurvePlotter(RunPlotter):
    """
    Loss terms (top) and gradient norm (bottom) against the optimizer step.

    Curves are smoothed with a trailing rolling mean over ``window`` steps.
    """

    required_columns = ("step",) + LOSS_COLUMNS + ("grad_norm",)

    def __init__(self, input_path: Union[str, Path], window: int = 25):
        super().__init__(input_path)
        self.window = max(1, int(window))

    def draw(self, data: pd.DataFrame) -> plt.Figure:
        fig, (ax_loss, ax_grad) = plt.subplots(2, 1, figsize=(10, 7), sharex=True)
        colors = plt.cm.tab10(range(len(LOSS_COLUMNS)))
        for column, color in zip(LOSS_COLUMNS, colors):
            smoothed = data[column].rolling(self.window, min_periods=1).mean()
            ax_loss.plot(data["step"], smoothed, label=column, color=color, linewidth=1.5)
        ax_loss.set_ylabel("Loss", fontsize=12)
        ax_loss.set_title(f"Training curves: {self.input_path.parent.name}", fontsize=14, fontweight="bold")
        ax_loss.legend(loc="best", fontsize=9)
        ax_loss.grid(True, alpha=0.3)

        ax_grad.plot(data["step"], data["grad_norm"].rolling(self.window, min_periods=1).mean(),
                     color="gray", linewidth=1.2)
        ax_grad.set_xlabel("Step", fontsize=12)
        ax_grad.set_ylabel("Gradient norm", fontsize=12)
        ax_grad.grid(True, alpha=0.3)

        plt.tight_layout()
        return fig
