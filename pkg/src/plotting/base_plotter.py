"""
Abstract base class for all run plotters.

This module defines the interface that every plotter implementation follows,
so training curves and sweep charts share one loading/saving API.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Union
import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from src.pipeline.errors import ConfigError  # noqa: E402
from src.pipeline.utils import ensure_dir  # noqa: E402

DPI = 150


class RunPlotter(ABC):
    """
    Abstract base class for all run plotters.

    Each concrete plotter implementation should handle:
    - Loading one CSV produced by the lab (metrics.csv, sweep results)
    - Drawing a single figure from it
    """

    #: Columns the input CSV must carry
    required_columns: tuple = ()

    def __init__(self, input_path: Union[str, Path]):
        """
        Initialize the plotter.

        Args:
            input_path: CSV file to plot
        """
        self.log = logging.getLogger(self.__class__.__name__)
        self.input_path = Path(input_path)
        self.data: Optional[pd.DataFrame] = None

    def load_data(self) -> pd.DataFrame:
        """
        Read the input CSV and check its columns.

        Raises:
            ConfigError: If a required column is missing
        """
        frame = pd.read_csv(self.input_path)
        missing = [c for c in self.required_columns if c not in frame.columns]
        if missing:
            raise ConfigError(f"{self.input_path}: missing column(s) {missing} for {self.__class__.__name__}")
        self.data = frame
        return frame

    @abstractmethod
    def draw(self, data: pd.DataFrame) -> plt.Figure:
        """
        Build the figure for the loaded data.

        Args:
            data: The loaded CSV

        Returns:
            Matplotlib figure (closed by ``plot`` after saving)
        """
        pass

    def plot(self, out_path: Union[str, Path]) -> Path:
        """Load, draw and save as PNG."""
        data = self.data if self.data is not None else self.load_data()
        fig = self.draw(data)
        out_path = Path(out_path)
        ensure_dir(out_path.parent)
        fig.savefig(out_path, dpi=DPI, bbox_inches="tight")
        plt.close(fig)
        self.log.info("Saved plot: %s", out_path)
        return out_path
