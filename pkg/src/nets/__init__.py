"""
Student denoiser, projection head and frozen teacher encoder.
"""

from src.nets.config import StudentConfig
from src.nets.init import init_params
from src.nets.layers import bind
from src.nets.projector import ProjectionHead, projector_forward
from src.nets.student import StudentNetwork, student_forward
from src.nets.teacher import TeacherEncoder, teacher_encode

__all__ = [
    'ProjectionHead',
    'StudentConfig',
    'StudentNetwork',
    'TeacherEncoder',
    'bind',
    'init_params',
    'projector_forward',
    'student_forward',
    'teacher_encode',
]
