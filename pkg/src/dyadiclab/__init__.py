"""Numerical laboratory for the dyadic shell model.

Submodules: ``shell_model`` (parameters, right-hand sides, X <-> Y
rescaling), ``stepper`` (adaptive integrators with events and dense
output), ``invariant_region`` (region geometry, positivity certificates,
boundary-flux scan), ``stationary`` (stationary profiles),
``diagnostics`` (norms, energy inequality, comparison tools) and ``lab``
(config-driven experiments and the CLI).
"""
from .kernels import available_backends, backend_name, use_backend
from .shell_model import (Formulation, ModelParams, NonFiniteStateError, ShellState,
                          Truncation, energy, rhs, x_to_y, y_to_x)
from .stepper import StepControl, TerminationCause, Trajectory, integrate

__version__ = "0.1.0"

__all__ = [
    "Formulation", "ModelParams", "NonFiniteStateError", "ShellState", "StepControl",
    "TerminationCause", "Trajectory", "Truncation", "available_backends", "backend_name",
    "energy", "integrate", "rhs", "use_backend", "x_to_y", "y_to_x",
]
