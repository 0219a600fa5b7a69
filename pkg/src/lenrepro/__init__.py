"""Bayesian-observer toolkit for length-reproduction experiments.

Modules: model (closed-form observer), simulate (seeded schedules and
synthetic cohorts), analysis (empirical error-decomposition pipeline),
fitting (shared-prior grid fits), cli (command-line pipeline).
"""
from .model import (
    DEFAULT_STIMULI,
    GaussianBelief,
    MotorCombination,
    MotorNoiseSpec,
    NoiseModel,
    StimulusSet,
    fuse_gaussians,
)
from .records import TrialRecord
from .simulate import DemonstratorNoise, ObserverParams, ScheduleConfig

__all__ = [
    "DEFAULT_STIMULI",
    "DemonstratorNoise",
    "GaussianBelief",
    "MotorCombination",
    "MotorNoiseSpec",
    "NoiseModel",
    "ObserverParams",
    "ScheduleConfig",
    "StimulusSet",
    "TrialRecord",
    "fuse_gaussians",
]

__version__ = "0.1.0"
