# core/__init__.py
"""
코어 모듈 초기화
"""

from .errors import NPHMMError, StageError, ValidationError
from .basis import BasisFamily, BasisKind, DensityFn, project, valid_dimensions
from .hmm_model import HMMSpec, JointModel, Scenario, TransitionMatrix, sample_chain, stationary
from .moments import MomentSet, empirical_moments, population_moments
from .spectral import SpectralEstimate, spectral_estimate
from .contrast import ContrastContext, FitResult, gamma, minimize_gamma
from .optimizer import OptimizerConfig, cmaes_minimize
from .selection import CalibrationMethod, SelectionTrace, calibrate, penalty, select_M
from .hd_assumption import determinant_H, quadratic_form_D
from .evaluation import PipelineReport, align, run_pipeline, run_replicates

__all__ = [
    # Errors
    'NPHMMError', 'StageError', 'ValidationError',

    # Model
    'BasisFamily', 'BasisKind', 'DensityFn', 'project', 'valid_dimensions',
    'HMMSpec', 'JointModel', 'Scenario', 'TransitionMatrix', 'sample_chain', 'stationary',

    # Estimation
    'MomentSet', 'empirical_moments', 'population_moments',
    'SpectralEstimate', 'spectral_estimate',
    'ContrastContext', 'FitResult', 'gamma', 'minimize_gamma',
    'OptimizerConfig', 'cmaes_minimize',

    # Selection and checks
    'CalibrationMethod', 'SelectionTrace', 'calibrate', 'penalty', 'select_M',
    'determinant_H', 'quadratic_form_D',
    'PipelineReport', 'align', 'run_pipeline', 'run_replicates',
]
