"""
Conditional flow matching: interpolant, loss, Euler sampler and guidance.
"""

from src.flow.interpolant import FlowBatch, InterpolantSchedule, interpolate, make_flow_batch
from src.flow.objective import fm_loss, total_training_loss
from src.flow.sampler import SamplerConfig, cfg_velocity, euler_sample

__all__ = [
    'FlowBatch',
    'InterpolantSchedule',
    'SamplerConfig',
    'cfg_velocity',
    'euler_sample',
    'fm_loss',
    'interpolate',
    'make_flow_batch',
    'total_training_loss',
]
