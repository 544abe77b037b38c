"""Exception hierarchy. Each class maps to a CLI failure class."""


class SwaveError(Exception):
    exit_code = 1


class ParameterError(SwaveError, ValueError):
    exit_code = 2


class ConfigError(ParameterError):
    exit_code = 2


class DomainError(SwaveError, ValueError):
    """A point or field lies outside the computational domain."""

    exit_code = 3


class GeometryError(SwaveError):
    exit_code = 3


class SolverError(SwaveError):
    exit_code = 3


class PositivityError(SolverError):
    def __init__(self, message, step=None, node=None):
        super().__init__(message)
        self.step = step
        self.node = node


class InstabilityError(SolverError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class OptimizerError(SwaveError):
    exit_code = 4


class LineSearchError(OptimizerError):
    pass
