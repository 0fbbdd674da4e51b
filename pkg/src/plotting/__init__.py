"""
Plotting module for training curves and sweep charts.

"""

from src.plotting.plot_factory import RunPlotterFactory
from src.plotting.base_plotter import RunPlotter
from src.plotting.metrics_plotter import MetricsCurvePlotter
from src.plotting.sweep_plotter import SweepBarPlotter

__all__ = [
    'RunPlotterFactory',
    'RunPlotter',
    'MetricsCurvePlotter',
    'SweepBarPlotter',
]
