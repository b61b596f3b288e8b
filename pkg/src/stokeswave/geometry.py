"""Flattening map of the fluid domain onto the reference strip.

The map is ``F(x, z) = (x, rho(x, z))`` with
``rho = (b + z)/b * exp(delta z |D|) eta + z``.  Its Jacobian determinant is
``J = d rho / dz`` and the inverse-Jacobian matrix is
``A = [[1, 0], [-rho_x / J, 1 / J]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import DepthViolation, JacobianDegenerate
from .spectral import (
    GridSpec,
    SurfaceField,
    VolumeField,
    deriv_x,
    real_basis_analysis,
    real_basis_derivative,
    real_basis_synthesis,
)

MAX_DELTA_HALVINGS = 8


def _exp_matrix(grid: GridSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation matrix of Fourier modes at points x, Nyquist split evenly."""
    k = grid.k.copy()
    nyq = grid.Nx // 2
    k[nyq] = nyq
    ex = np.exp(1j * np.outer(x, k))
    ex[:, nyq] = np.cos(nyq * x)
    return ex, k


def lift_fields(
    eta: SurfaceField, delta: float, x: np.ndarray, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate rho, d(rho)/dx and d(rho)/dz on the tensor grid x by z."""
    g = eta.grid
    b = g.b
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    ex, k = _exp_matrix(g, x)
    ak = np.abs(k)
    damp = np.exp(delta * np.outer(ak, z))  # (k, z)
    c = eta.coeffs[:, None] * damp
    lift = np.real(ex @ c)
    ik = 1j * g.k.astype(float)
    ik[g.Nx // 2] = 0.0
    lift_x = np.real(ex @ (ik[:, None] * c))
    lift_z = np.real(ex @ ((delta * ak)[:, None] * c))
    s = (b + z) / b
    rho = s[None, :] * lift + z[None, :]
    rho_x = s[None, :] * lift_x
    rho_z = lift / b + s[None, :] * lift_z + 1.0
    return rho, rho_x, rho_z


def min_depth(eta: SurfaceField, oversample: int = 4) -> float:
    xf = 2 * np.pi * np.arange(oversample * eta.grid.Nx) / (oversample * eta.grid.Nx)
    return float(np.min(eta.evaluate(xf)) + eta.grid.b)


@dataclass(frozen=True, eq=False)
class FlatteningGeometry:
    grid: GridSpec
    eta: SurfaceField
    delta: float
    rho: VolumeField
    J: VolumeField
    A: VolumeField
    B: VolumeField
    normal: tuple[SurfaceField, SurfaceField]
    jac_lower_bound: float
    depth: float

    # Raw arrays consumed by the Stokes assembly.
    @cached_property
    def rho_x(self) -> np.ndarray:
        return self.grid.Dx @ self.rho.values[0]

    @cached_property
    def jac(self) -> np.ndarray:
        return self.J.values[0]

    @cached_property
    def a21(self) -> np.ndarray:
        return self.A.values[2]

    @cached_property
    def a22(self) -> np.ndarray:
        return self.A.values[3]

    @cached_property
    def eta_x(self) -> np.ndarray:
        return -self.normal[0].values

    def inverse_jacobian_defect(self) -> float:
        """max |A grad(F) - I| over the collocation nodes."""
        rx, J = self.rho_x, self.jac
        A = self.A.values
        gF = np.stack([np.ones_like(J), np.zeros_like(J), rx, J])
        prod = np.stack(
            [
                A[0] * gF[0] + A[1] * gF[2],
                A[0] * gF[1] + A[1] * gF[3],
                A[2] * gF[0] + A[3] * gF[2],
                A[2] * gF[1] + A[3] * gF[3],
            ]
        )
        ident = np.stack([np.ones_like(J), np.zeros_like(J), np.zeros_like(J), np.ones_like(J)])
        return float(np.max(np.abs(prod - ident)))

    def fine_fields(self, factor: int = 2) -> tuple[GridSpec, np.ndarray, np.ndarray, np.ndarray]:
        """Analytic rho, rho_x, J on a refined grid (for residual checks)."""
        fine = self.grid.refined(factor)
        rho, rx, J = lift_fields(self.eta, self.delta, fine.x, fine.z)
        return fine, rho, rx, J


def _default_delta(eta: SurfaceField, c0: float) -> float:
    g = eta.grid
    weighted = float(np.sum(np.abs(g.k) * np.abs(eta.coeffs)))
    return c0 / (2.0 * g.b * (1.0 + weighted))


def build_geometry(
    eta: SurfaceField, grid: GridSpec | None = None, delta: float | None = None
) -> FlatteningGeometry:
    """Construct the flattening data for surface ``eta``.

    ``delta`` is selected automatically unless given; the analytic Jacobian is
    checked on a 2x oversampled grid against the lower bound ``c0 / (2 b)``,
    halving delta when needed.
    """
    grid = grid or eta.grid
    if eta.grid != grid:
        eta = eta.resample(grid)
    b = grid.b
    c0 = min_depth(eta)
    if not c0 > 0:
        raise DepthViolation(f"min(eta + b) = {c0:.3e} <= 0")
    bound = c0 / (2.0 * b)
    fine = grid.refined(2)
    d = delta if delta is not None else _default_delta(eta, c0)
    for _ in range(MAX_DELTA_HALVINGS + 1):
        _, _, Jf = lift_fields(eta, d, fine.x, fine.z)
        jmin = float(np.min(Jf))
        if jmin >= bound:
            break
        if delta is not None:
            raise JacobianDegenerate(f"min J = {jmin:.3e} below {bound:.3e} for delta = {d}")
        d *= 0.5
    else:
        raise JacobianDegenerate(f"min J = {jmin:.3e} after {MAX_DELTA_HALVINGS} halvings")

    rho, _, _ = lift_fields(eta, d, grid.x, grid.z)
    J = rho @ grid.Dz.T
    if np.min(J) <= 0:
        raise JacobianDegenerate("collocated Jacobian is not positive")
    rx = grid.Dx @ rho
    a21 = -rx / J
    a22 = 1.0 / J
    A = np.stack([np.ones_like(J), np.zeros_like(J), a21, a22])
    B = a21**2 + a22**2
    eta_x = deriv_x(eta, 1)
    normal = (-eta_x, SurfaceField.constant(grid, 1.0))
    return FlatteningGeometry(
        grid=grid,
        eta=eta,
        delta=d,
        rho=VolumeField(grid, rho),
        J=VolumeField(grid, J),
        A=VolumeField(grid, A),
        B=VolumeField(grid, B),
        normal=normal,
        jac_lower_bound=jmin,
        depth=c0,
    )


# ---------------------------------------------------------------- curvature


CURVATURE_PAD = 2


@lru_cache(maxsize=16)
def slope_operator(Nx: int, pad: int = CURVATURE_PAD) -> tuple[np.ndarray, float]:
    """Matrix S taking grid values to d_x on a pad-times finer grid, and weight Nx/M.

    ``-w S^T v`` equals ``-d_x`` of the Nx-mode truncation of fine-grid values v,
    so curvature and its Jacobian share one symmetric quadrature.
    """
    M = pad * Nx
    xf = 2 * np.pi * np.arange(M) / M
    S = real_basis_synthesis(Nx, xf) @ real_basis_derivative(Nx) @ real_basis_analysis(Nx)
    return S, Nx / M


def _curvature_flux(slope: np.ndarray) -> np.ndarray:
    return slope / np.sqrt(1.0 + slope**2)


def mean_curvature(eta: SurfaceField) -> SurfaceField:
    """H(eta) = -(eta_x / sqrt(1 + eta_x^2))_x.

    The flux is evaluated on a 2x padded grid and truncated before the outer
    derivative, so the output integrates to zero exactly and its derivative
    with respect to eta is the symmetric operator of ``capgrav.TEtaOperator``.
    """
    g = eta.grid
    M = CURVATURE_PAD * g.Nx
    keep = np.abs(g.k) < g.Nx // 2
    pos = np.rint(g.k[keep]).astype(int) % M
    hat = np.zeros(M, dtype=complex)
    hat[pos] = 1j * g.k[keep] * eta.coeffs[keep]
    slope = np.real(np.fft.ifft(hat) * M)
    flux = np.fft.fft(_curvature_flux(slope)) / M
    out = np.zeros(g.Nx, dtype=complex)
    out[keep] = -1j * g.k[keep] * flux[pos]
    return SurfaceField(g, out)


@dataclass(frozen=True)
class SurfaceGeometry:
    normal: tuple[SurfaceField, SurfaceField]
    mean_curvature: SurfaceField
    min_depth: float


def surface_geometry(eta: SurfaceField, c0: float = 0.0) -> SurfaceGeometry:
    depth = min_depth(eta)
    if depth <= c0:
        raise DepthViolation(f"min(eta + b) = {depth:.3e} <= {c0:.3e}")
    return SurfaceGeometry(
        normal=(-deriv_x(eta, 1), SurfaceField.constant(eta.grid, 1.0)),
        mean_curvature=mean_curvature(eta),
        min_depth=depth,
    )
