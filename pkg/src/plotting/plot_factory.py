"""
Factory class for creating run plotters.

This factory creates the appropriate plotter instance for a plot kind,
following the factory pattern used throughout the codebase.
"""

from typing import Dict, List, Type
from pathlib import Path
import logging

from src.pipeline.errors import ConfigError
from src.plotting.base_plotter import RunPlotter
from src.plotting.metrics_plotter import MetricsCurvePlotter
from src.plotting.sweep_plotter import SweepBarPlotter


class RunPlotterFactory:
    """
    Factory class for creating plotters by kind.

    Usage:
        factory = RunPlotterFactory()
        plotter = factory.create_plotter('metrics', 'runs/default/metrics.csv')
        plotter.plot('runs/default/curves.png')
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

        # Register available plotters: kind -> PlotterClass
        self._plotters: Dict[str, Type[RunPlotter]] = {
            'metrics': MetricsCurvePlotter,
            'sweep': SweepBarPlotter,
        }

    def create_plotter(self, kind: str, input_path: Path) -> RunPlotter:
        """
        Create a plotter for the specified kind.

        Raises:
            ConfigError: If the kind is not registered
        """
        key = kind.lower()
        if key not in self._plotters:
            raise ConfigError(f"Unknown plot kind: {kind}. Available plotters: {self.available()}")
        plotter_class = self._plotters[key]
        self.logger.debug("Creating %s plotter: %s", key, plotter_class.__name__)
        return plotter_class(input_path)

    def register_plotter(self, kind: str, plotter_class: Type[RunPlotter]) -> None:
        self._plotters[kind.lower()] = plotter_class
        self.logger.info("Registered plotter: %s -> %s", kind, plotter_class.__name__)

    def available(self) -> List[str]:
        return sorted(self._plotters)
