"""
Evaluation: teacher-space Fréchet distance, Gram discrepancy and similarity maps.
"""

from src.evaluation.eigen import psd_sqrt, symmetric_eig
from src.evaluation.frechet import FrechetStats, feature_stats, frechet_distance, teacher_descriptors
from src.evaluation.gram_discrepancy import T_GRID, gram_discrepancy, gram_discrepancy_from_features
from src.evaluation.pgm import read_pgm, tile, unit_to_gray, write_pgm
from src.evaluation.report import EvalReport, EvalSettings, evaluate_checkpoint, generated_frechet
from src.evaluation.simmap import cosine_row, cosine_to_gray, simmap_export, teacher_simmap

__all__ = [
    'EvalReport',
    'EvalSettings',
    'FrechetStats',
    'T_GRID',
    'cosine_row',
    'cosine_to_gray',
    'evaluate_checkpoint',
    'feature_stats',
    'frechet_distance',
    'generated_frechet',
    'gram_discrepancy',
    'gram_discrepancy_from_features',
    'psd_sqrt',
    'read_pgm',
    'simmap_export',
    'symmetric_eig',
    'teacher_descriptors',
    'teacher_simmap',
    'tile',
    'unit_to_gray',
    'write_pgm',
]
