"""Spectral solvers for periodic free-boundary Stokes and Navier-Stokes waves."""

from .errors import (
    CompatibilityViolation,
    DepthPreconditionViolated,
    DepthViolation,
    JacobianDegenerate,
    MaxIterExceeded,
    NewtonDiverged,
    NoContraction,
    NonZeroMean,
    PreconditionError,
    ResidualTooLarge,
    SingularSystem,
    SolverError,
    StepRejected,
    StokesWaveError,
)
from .geometry import FlatteningGeometry, build_geometry, mean_curvature
from .spectral import GridSpec, SurfaceField, VolumeField

__all__ = [
    "CompatibilityViolation",
    "DepthPreconditionViolated",
    "DepthViolation",
    "FlatteningGeometry",
    "GridSpec",
    "JacobianDegenerate",
    "MaxIterExceeded",
    "NewtonDiverged",
    "NoContraction",
    "NonZeroMean",
    "PreconditionError",
    "ResidualTooLarge",
    "SingularSystem",
    "SolverError",
    "StepRejected",
    "StokesWaveError",
    "SurfaceField",
    "VolumeField",
    "build_geometry",
    "mean_curvature",
]

__version__ = "0.1.0"
