"""Exception hierarchy shared across the package.

Errors are split by what went wrong rather than where: bad arguments, invalid
constructed models, infeasible actions, numerical failures, solver
non-convergence, and resource guards. The CLI maps these onto exit codes.
"""

from __future__ import annotations


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class ModelValidityError(ValueError):
    """A constructed stochastic model failed a structural validity check."""


class FeasibilityError(ValueError):
    """A spend decision exceeds what the issuing state's battery allows."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


class ScopeError(ValueError):
    """A policy's scope does not match the requested use."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its accuracy target."""

    def __init__(self, message: str, *, last_iterate=None, achieved_tol=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.achieved_tol = achieved_tol


class NonConvergenceError(RuntimeError):
    """An iterative solver exhausted its budget; carries its residual trace."""

    def __init__(self, message: str, *, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class OscillationError(NonConvergenceError):
    """A dual loop stopped reducing its worst constraint violation."""


class GuardError(RuntimeError):
    """A resource guard (memory or enumeration size) refused to proceed."""
