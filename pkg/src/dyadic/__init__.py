"""Forced inviscid dyadic shell model: integration, stability diagnostics and reference checks."""

from .errors import (
    ConfigError,
    DyadicError,
    IntegrationError,
    InvalidLambda,
    MaxStepsExceeded,
    NonFiniteState,
    ShapeMismatch,
    StepSizeUnderflow,
)
from .integrator import EventSpec, StepControl, Trajectory, detect_event, integrate, step
from .model import Closure, ModelParams, ShellState, fixed_point, rhs

__version__ = "0.1.0"

__all__ = [
    "Closure",
    "ConfigError",
    "DyadicError",
    "EventSpec",
    "IntegrationError",
    "InvalidLambda",
    "MaxStepsExceeded",
    "ModelParams",
    "NonFiniteState",
    "ShapeMismatch",
    "ShellState",
    "StepControl",
    "StepSizeUnderflow",
    "Trajectory",
    "detect_event",
    "fixed_point",
    "integrate",
    "rhs",
]
