"""Optimal control of shallow-water waves with a geometric terminal-cost parameter."""

from .errors import (ConfigError, DomainError, GeometryError, InstabilityError, LineSearchError, OptimizerError,
                     ParameterError, PositivityError, SolverError, SwaveError)
from .grid import Grid1D, Grid2D, PhysicsParams, Trajectory
from .optimizer import OptimizerConfig, OptimizeResult, Point, optimize
from .problems import ControlProblem1D, ControlProblem2D
from .swe import ControlRegion, SolverConfig, solve_forward_1d, solve_forward_2d

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "GeometryError", "InstabilityError", "LineSearchError", "OptimizerError",
    "ParameterError", "PositivityError", "SolverError", "SwaveError",
    "Grid1D", "Grid2D", "PhysicsParams", "Trajectory",
    "OptimizerConfig", "OptimizeResult", "Point", "optimize",
    "ControlProblem1D", "ControlProblem2D",
    "ControlRegion", "SolverConfig", "solve_forward_1d", "solve_forward_2d",
]
