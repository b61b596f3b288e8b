"""Exception hierarchy shared by all solver layers.

``PreconditionError`` subclasses map to CLI exit code 2, ``SolverError``
subclasses to exit code 3.
"""

from __future__ import annotations


class StokesWaveError(Exception):
    """Base class."""


class PreconditionError(StokesWaveError):
    """Input data violates a stated precondition."""


class SolverError(StokesWaveError):
    """A numerical method failed on admissible data."""


class DepthViolation(PreconditionError):
    pass


class DepthPreconditionViolated(PreconditionError):
    pass


class CompatibilityViolation(PreconditionError):
    pass


class NonZeroMean(PreconditionError):
    pass


class JacobianDegenerate(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class ResidualTooLarge(SolverError):
    pass


class NoContraction(SolverError):
    def __init__(self, message: str, ratios=None):
        super().__init__(message)
        self.ratios = list(ratios or [])


class MaxIterExceeded(SolverError):
    pass


class NewtonDiverged(SolverError):
    pass


class StepRejected(SolverError):
    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace
