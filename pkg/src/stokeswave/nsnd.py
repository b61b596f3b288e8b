"""Normal-stress to normal-Dirichlet operators.

``Psi[eta] chi`` is the normal trace ``v.N`` of the gamma-Stokes flow driven by
the surface stress ``chi N``.  Its inverse runs the Navier problem with
prescribed ``v.N`` and reads back the normal stress.  ``phi_apply`` and
``xi_apply`` are the Navier-Stokes counterparts obtained by Picard iteration.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import NonZeroMean
from .geometry import FlatteningGeometry
from .spectral import SurfaceField, deriv_x, project_mean_zero, sobolev_norm
from .stokes import (
    StokesSystem,
    get_system,
    solve_navier_stokes_navier,
    solve_navier_stokes_stress,
)

MEAN_TOL = 1e-10


class PsiOperator:
    """Psi_gamma[eta] with cached stress and Navier factorizations.

    When ``reference`` is given, solves are preconditioned by the reference
    operator's factorizations instead of factoring this geometry.
    """

    def __init__(self, geometry: FlatteningGeometry, gamma: float = 0.0, reference: "PsiOperator | None" = None):
        self.geometry = geometry
        self.grid = geometry.grid
        self.gamma = float(gamma)
        self.reference = reference

    @cached_property
    def stress_system(self) -> StokesSystem:
        if self.reference is None:
            return get_system(self.geometry, self.gamma, "stress")
        return StokesSystem(self.geometry, self.gamma, "stress")

    @cached_property
    def navier_system(self) -> StokesSystem:
        if self.reference is None:
            return get_system(self.geometry, self.gamma, "navier")
        return StokesSystem(self.geometry, self.gamma, "navier")

    def _solve(self, system: StokesSystem, ref: StokesSystem | None, b: np.ndarray) -> np.ndarray:
        if b.ndim == 1 or ref is None or system.factored:
            if b.ndim == 2 and not system.factored:
                system.factor()
            X, _ = system.solve(b, ref)
            return X
        return np.stack([system.solve(col, ref)[0] for col in b.T], axis=1)

    def _stress_rhs(self, values: np.ndarray) -> np.ndarray:
        """Data rows for surface stress chi N, chi given as grid values (Nx, B)."""
        n1 = self.geometry.normal[0].values[:, None]
        sys = self.stress_system
        out = np.zeros((sys.size, values.shape[1]))
        rows = np.zeros((3, sys.m, sys.nz, values.shape[1]))
        rows[0, :, 0] = sys.Q @ (values * n1)
        rows[1, :, 0] = sys.Q @ values
        out[: 3 * sys.nf] = rows.reshape(3 * sys.nf, -1)
        return out

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Psi on a batch of grid-value columns; returns real coefficients (Nx-1, B)."""
        values = np.atleast_2d(values.T).T
        sys = self.stress_system
        ref = None if self.reference is None else self.reference.stress_system
        X = self._solve(sys, ref, self._stress_rhs(values))
        cu, cw, _, _ = sys.split(X)
        u0 = sys.E @ cu[:, 0, :]
        w0 = sys.E @ cw[:, 0, :]
        return sys.Q @ (-sys.etax[:, None] * u0 + w0)

    def apply(self, chi: SurfaceField) -> SurfaceField:
        return SurfaceField.from_real_coeffs(self.grid, self.apply_values(chi.values)[:, 0])

    def inverse_apply(self, h: SurfaceField) -> SurfaceField:
        if abs(h.mean) > MEAN_TOL * max(1.0, h.max_abs()):
            raise NonZeroMean(f"mean(h) = {h.mean:.3e}; the inverse needs mean-zero data")
        sys = self.navier_system
        ref = None if self.reference is None else self.reference.navier_system
        b = sys.rhs((np.zeros(self.grid.Nx), h.values))
        X = self._solve(sys, ref, b)
        return project_mean_zero(sys.normal_stress(X))

    def matrix(self, modes: int | None = None) -> np.ndarray:
        """Psi in the L2-orthonormal real basis (cos kx, sin kx)/sqrt(pi), mean excluded."""
        n = self.grid.Nx - 2
        modes = n if modes is None else int(modes)
        if not 1 <= modes <= n:
            raise ValueError(f"modes must lie in [1, {n}]")
        sys = self.stress_system
        vals = sys.E[:, 1 : modes + 1]
        # Both normalizations cancel: <Psi e_j, e_i> equals the raw real coefficient.
        return self.apply_values(vals)[1 : modes + 1]


def psi_apply(op: PsiOperator, chi: SurfaceField) -> SurfaceField:
    return op.apply(chi)


def psi_inverse_apply(op: PsiOperator, h: SurfaceField) -> SurfaceField:
    return op.inverse_apply(h)


def psi_matrix(op: PsiOperator, modes: int | None = None) -> np.ndarray:
    return op.matrix(modes)


def asymmetry(M: np.ndarray) -> float:
    """||M - M^T||_F / ||M||_F."""
    return float(np.linalg.norm(M - M.T) / np.linalg.norm(M))


def coercivity_constant(M: np.ndarray) -> float:
    """Smallest eigenvalue of -sym(M) measured in the H^{-1/2} metric.

    ``M`` is a ``psi_matrix`` (ordered cos 1, sin 1, cos 2, ...).  The weight
    makes the constant a property of the operator rather than of the truncation.
    """
    n = M.shape[0]
    k = (np.arange(n) + 2) // 2
    w = (1.0 + k.astype(float) ** 2) ** 0.25
    S = -0.5 * (M + M.T)
    return float(np.linalg.eigvalsh(w[:, None] * S * w[None, :])[0])


def commutator_defect(
    op: PsiOperator, chi: SurfaceField, alpha: int = 1, normalize: bool = False
) -> float:
    """||Psi d^a chi - d^a Psi chi||_{H^{3/2}} / ||chi||_{H^{a - 1/2}}.

    With ``normalize`` the ratio is further divided by ||eta||_{H^{a + 3/2}}.
    """
    left = op.apply(deriv_x(chi, alpha))
    right = deriv_x(op.apply(chi), alpha)
    num = sobolev_norm(left - right, 1.5)
    den = sobolev_norm(project_mean_zero(chi), alpha - 0.5)
    if den == 0:
        return 0.0
    out = num / den
    if normalize:
        eta_norm = sobolev_norm(op.geometry.eta, alpha + 1.5)
        out = out / eta_norm if eta_norm > 0 else 0.0
    return float(out)


# ---------------------------------------------------------------- nonlinear


def phi_apply(
    geometry: FlatteningGeometry,
    gamma: float,
    chi: SurfaceField,
    tol: float = 1e-12,
    reference: StokesSystem | None = None,
) -> SurfaceField:
    """Normal trace of the gamma-Navier-Stokes flow with surface stress chi N."""
    sol = solve_navier_stokes_stress(geometry, gamma, chi, tol=tol, reference=reference)
    return sol.surface_normal_velocity()


def xi_apply(
    geometry: FlatteningGeometry,
    gamma: float,
    h: SurfaceField,
    tol: float = 1e-12,
    reference: StokesSystem | None = None,
) -> SurfaceField:
    """Normal stress of the gamma-Navier-Stokes flow with v.N = h."""
    if abs(h.mean) > MEAN_TOL * max(1.0, h.max_abs()):
        raise NonZeroMean(f"mean(h) = {h.mean:.3e}; the inverse needs mean-zero data")
    sol = solve_navier_stokes_navier(geometry, gamma, h, tol=tol, reference=reference)
    return sol.surface_normal_stress()


def phi_inverse_apply(
    geometry: FlatteningGeometry,
    gamma: float,
    h: SurfaceField,
    tol: float = 1e-12,
    reference: StokesSystem | None = None,
) -> SurfaceField:
    """Mean-zero right inverse of ``phi_apply``."""
    return project_mean_zero(xi_apply(geometry, gamma, h, tol, reference))


# ---------------------------------------------------------------- flat strip


def flat_strip_symbol(k: int, b: float = 1.0) -> float:
    """m(k) with Psi_0[0] cos(kx) = -m(k) cos(kx) on the strip of depth b.

    The stream function ``(A + B z) cosh kz + (C + D z) sinh kz`` carries the
    flow; no slip at z = -b and the stress conditions at z = 0 fix the four
    constants.  Then ``v.N = w(0) = k^2 psi(0)``.
    """
    k = float(k)
    if k == 0:
        return 0.0

    def derivs(z):
        ch, sh = np.cosh(k * z), np.sinh(k * z)
        c = np.array([ch, k * sh, k * k * ch, k**3 * sh])
        s = np.array([sh, k * ch, k * k * sh, k**3 * ch])
        zc = z * c + np.arange(4) * np.concatenate([[0.0], c[:-1]])
        zs = z * s + np.arange(4) * np.concatenate([[0.0], s[:-1]])
        return np.stack([c, zc, s, zs], axis=1)  # rows: derivative order

    bot = derivs(-b)
    top = derivs(0.0)
    A = np.array([bot[0], bot[1], top[2] + k * k * top[0], top[3] - 3 * k * k * top[1]])
    coef = np.linalg.solve(A, np.array([0.0, 0.0, 0.0, 1.0]))
    return float(-k * k * (top[0] @ coef))
