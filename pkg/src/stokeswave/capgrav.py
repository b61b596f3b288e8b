"""Capillary-gravity operator g eta + sigma H(eta), its linearization and inverse.

The curvature is evaluated in flux form ``H = -w S^T q(S eta)`` with
``q(s) = s / sqrt(1 + s^2)`` and S the derivative sampled on a padded grid.
The linearization is then exactly ``T_eta f = g f + sigma w S^T (a S f)`` with
``a = (1 + eta_x^2)^(-3/2)``, a symmetric matrix on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .errors import DepthPreconditionViolated, DepthViolation, NewtonDiverged, SingularSystem
from .geometry import mean_curvature, min_depth, slope_operator
from .spectral import SurfaceField, sobolev_norm

NEWTON_MAX_ITER = 30
MAX_HALVINGS = 10
RESIDUAL_INDEX = 1.5


@dataclass(frozen=True)
class CapGravParams:
    g: float = 1.0
    sigma: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        for name in ("g", "sigma", "b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


def capgrav_apply(eta: SurfaceField, params: CapGravParams) -> SurfaceField:
    return eta * params.g + mean_curvature(eta) * params.sigma


class TEtaOperator:
    """Linearization of the capillary-gravity operator at eta."""

    def __init__(self, eta: SurfaceField, params: CapGravParams):
        self.eta = eta
        self.grid = eta.grid
        self.params = params

    @cached_property
    def slope(self) -> np.ndarray:
        """eta_x at the padded quadrature points."""
        S, _ = slope_operator(self.grid.Nx)
        return S @ self.eta.values

    @cached_property
    def a(self) -> np.ndarray:
        """Coefficient a_11 = (1 + eta_x^2)^(-3/2) at the padded quadrature points."""
        return (1.0 + self.slope**2) ** -1.5

    @cached_property
    def matrix(self) -> np.ndarray:
        S, w = slope_operator(self.grid.Nx)
        return self.params.g * np.eye(self.grid.Nx) + self.params.sigma * w * (S.T @ (self.a[:, None] * S))

    @cached_property
    def _factor(self):
        M = self.matrix
        lu, piv = sla.lu_factor(M, check_finite=False)
        rcond, info = sla.lapack.dgecon(lu, np.linalg.norm(M, 1), norm="1")
        if info != 0 or rcond < 1e-15:
            raise SingularSystem(f"T_eta is singular (rcond = {rcond:.2e})")
        return lu, piv

    def ellipticity_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise (1 + eta_x^2)^(-3/2) and (1 + eta_x^2)^(-1/2)."""
        w = 1.0 + self.slope**2
        return w**-1.5, w**-0.5

    def apply(self, f: SurfaceField) -> SurfaceField:
        return SurfaceField.from_values(self.grid, self.matrix @ f.values)

    def solve(self, F: SurfaceField, tol: float = 1e-10) -> SurfaceField:
        x = sla.lu_solve(self._factor, F.values, check_finite=False)
        res = np.max(np.abs(self.matrix @ x - F.values))
        if res > tol * max(1.0, F.max_abs()):
            raise SingularSystem(f"T_eta solve residual {res:.2e} exceeds {tol:.0e}")
        return SurfaceField.from_values(self.grid, x)


def t_eta_apply(op: TEtaOperator, f: SurfaceField) -> SurfaceField:
    return op.apply(f)


def t_eta_solve(op: TEtaOperator, F: SurfaceField, tol: float = 1e-10) -> SurfaceField:
    return op.solve(F, tol)


def r_eta(eta: SurfaceField, f: SurfaceField, params: CapGravParams, op: TEtaOperator | None = None) -> SurfaceField:
    """Remainder of the linearization: C(eta + f) - C(eta) - T_eta f."""
    op = op or TEtaOperator(eta, params)
    return capgrav_apply(eta + f, params) - capgrav_apply(eta, params) - op.apply(f)


@dataclass(frozen=True, eq=False)
class NewtonResult:
    eta: SurfaceField
    iterations: int
    residuals: list = field(default_factory=list)
    min_depth: float = 0.0

    @property
    def residual(self) -> float:
        return self.residuals[-1]


def capgrav_solve(
    phi: SurfaceField,
    params: CapGravParams,
    tol: float = 1e-12,
    max_iter: int = NEWTON_MAX_ITER,
    full_output: bool = False,
):
    """Damped Newton for g eta + sigma H(eta) = -phi started from -phi/g."""
    if not float(np.min(-phi.values)) > -params.g * params.b:
        raise DepthPreconditionViolated(
            f"min(-phi) = {np.min(-phi.values):.3e} must exceed -g b = {-params.g * params.b:.3e}"
        )

    def residual(eta):
        r = capgrav_apply(eta, params) + phi
        return r, sobolev_norm(r, RESIDUAL_INDEX)

    eta = phi * (-1.0 / params.g)
    r, rn = residual(eta)
    history = [rn]
    it = 0
    while rn >= tol:
        if it >= max_iter:
            raise NewtonDiverged(f"Newton stalled at residual {rn:.3e} after {it} iterations")
        it += 1
        step = TEtaOperator(eta, params).solve(-r, tol=1e-8)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = eta + step * lam
            if min_depth(trial) > 0:
                rt, rtn = residual(trial)
                if rtn < rn:
                    break
            lam *= 0.5
        else:
            raise NewtonDiverged(f"no residual decrease after {MAX_HALVINGS} step halvings (residual {rn:.3e})")
        eta, r, rn = trial, rt, rtn
        history.append(rn)
    depth = min_depth(eta)
    if depth <= 0:
        raise DepthViolation(f"steady surface leaves the strip: min(eta + b) = {depth:.3e}")
    if full_output:
        return NewtonResult(eta=eta, iterations=it, residuals=history, min_depth=depth)
    return eta
