"""Traveling waves as fixed points of perturbation maps around the steady surface.

With ``eta = eta_* + f`` and ``X = C(eta) - C(eta_*)`` (C the capillary-gravity
operator, ``C(eta_*) = -phi``), the wave equation
``gamma d_x eta + Psi[eta] (C(eta) + phi) = 0`` becomes

    T f = Psi[eta_*]^{-1}( -gamma d_x eta - (Psi[eta] - Psi[eta_*]) X ) - R f,

which defines the map ``f -> G(f)``.  The Navier-Stokes variant replaces Psi by
the nonlinear trace operator Phi_gamma.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .capgrav import CapGravParams, TEtaOperator, capgrav_apply, capgrav_solve, r_eta
from .errors import DepthViolation, MaxIterExceeded, NoContraction, ResidualTooLarge, StokesWaveError
from .geometry import build_geometry, min_depth
from .nsnd import PsiOperator, phi_apply, phi_inverse_apply
from .spectral import SurfaceField, deriv_x, project_mean_zero, sobolev_norm
from .stokes import gamma_star, get_system

log = logging.getLogger(__name__)

PICARD_TOL = 1e-13


@dataclass(eq=False)
class TravelingWaveResult:
    eta_star: SurfaceField
    f: SurfaceField
    gamma: float
    iterations: int = 0
    contraction_ratios: list = field(default_factory=list)
    residual: float = float("nan")
    converged: bool = False
    fixed_point_defect: float = float("nan")
    mass_log: list = field(default_factory=list)
    model: str = "stokes"
    error: str | None = None

    @property
    def eta_w(self) -> SurfaceField:
        return self.eta_star + self.f


def _norm(u: SurfaceField) -> float:
    return sobolev_norm(u, 0.0)


class StokesTravelingMap:
    """G_gamma around eta_* = C^{-1}(-phi), using Psi_0."""

    model = "stokes"

    def __init__(self, phi: SurfaceField, gamma: float, params: CapGravParams, eta_star: SurfaceField | None = None):
        self.phi = phi
        self.gamma = float(gamma)
        self.params = params
        self.eta_star = eta_star if eta_star is not None else capgrav_solve(phi, params)
        self.geo_star = build_geometry(self.eta_star)
        self.T = TEtaOperator(self.eta_star, params)
        self.c_star = capgrav_apply(self.eta_star, params)
        self._setup()
        self.mass_log: list[float] = []

    def _setup(self) -> None:
        self.psi_star = PsiOperator(self.geo_star, 0.0)

    def _trace_difference(self, geo, X: SurfaceField) -> SurfaceField:
        psi = PsiOperator(geo, 0.0, reference=self.psi_star)
        return psi.apply(X) - self.psi_star.apply(X)

    def _inverse(self, arg: SurfaceField) -> SurfaceField:
        return self.psi_star.inverse_apply(arg)

    def __call__(self, f: SurfaceField) -> SurfaceField:
        eta = self.eta_star + f
        geo = build_geometry(eta)
        X = capgrav_apply(eta, self.params) - self.c_star
        arg = -(deriv_x(eta, 1) * self.gamma) - self._trace_difference(geo, X)
        self.mass_log.append(arg.mean)
        Y = self._inverse(project_mean_zero(arg))
        return self.T.solve(Y - r_eta(self.eta_star, f, self.params, self.T))

    def trace(self, eta: SurfaceField, X: SurfaceField) -> SurfaceField:
        """The operator of the wave equation applied at a fresh geometry."""
        return PsiOperator(build_geometry(eta), 0.0).apply(X)

    def residual(self, eta_w: SurfaceField) -> float:
        """L2 norm of gamma d_x eta + Op[eta](C(eta) + phi)."""
        X = capgrav_apply(eta_w, self.params) + self.phi
        return _norm(deriv_x(eta_w, 1) * self.gamma + self.trace(eta_w, X))


class NavierStokesTravelingMap(StokesTravelingMap):
    """F_gamma: the same construction with the gamma-Navier-Stokes trace Phi_gamma."""

    model = "navier-stokes"

    def _setup(self) -> None:
        self.ref = get_system(self.geo_star, self.gamma, "stress")
        if self.gamma != 0:
            gs = gamma_star(self.geo_star)
            if abs(self.gamma) > gs:
                warnings.warn(f"|gamma| = {abs(self.gamma):.3g} exceeds the discrete estimate gamma* = {gs:.3g}", RuntimeWarning, stacklevel=3)

    def _phi(self, geo, chi: SurfaceField) -> SurfaceField:
        if geo is self.geo_star:
            from .stokes import solve_navier_stokes_stress

            sol = solve_navier_stokes_stress(geo, self.gamma, chi, tol=PICARD_TOL, system=self.ref)
            return sol.surface_normal_velocity()
        return phi_apply(geo, self.gamma, chi, tol=PICARD_TOL, reference=self.ref)

    def _trace_difference(self, geo, X: SurfaceField) -> SurfaceField:
        return self._phi(geo, X) - self._phi(self.geo_star, X)

    def _inverse(self, arg: SurfaceField) -> SurfaceField:
        return phi_inverse_apply(self.geo_star, self.gamma, arg, tol=PICARD_TOL)

    def trace(self, eta: SurfaceField, X: SurfaceField) -> SurfaceField:
        geo = build_geometry(eta)
        return phi_apply(geo, self.gamma, X, tol=PICARD_TOL, reference=self.ref)


def _anderson_step(history_f: list, history_g: list, depth: int) -> np.ndarray:
    """Anderson mixing over the last ``depth`` residuals (vectors of real coefficients)."""
    F = [g - f for f, g in zip(history_f, history_g)]
    m = min(depth, len(F) - 1)
    if m <= 0:
        return history_g[-1]
    dF = np.stack([F[-i] - F[-i - 1] for i in range(1, m + 1)], axis=1)
    dG = np.stack([history_g[-i] - history_g[-i - 1] for i in range(1, m + 1)], axis=1)
    theta, *_ = np.linalg.lstsq(dF, F[-1], rcond=None)
    return history_g[-1] - dG @ theta


def iterate_map(
    G: StokesTravelingMap,
    tol: float = 1e-10,
    max_iter: int = 100,
    f0: SurfaceField | None = None,
    anderson: int = 0,
) -> TravelingWaveResult:
    """Fixed-point loop ``f <- G(f)`` from f0 (default 0) with the standard checks."""
    grid = G.eta_star.grid
    f = f0 if f0 is not None else SurfaceField.zeros(grid)
    ratios: list[float] = []
    prev = None
    bad = 0
    hist_f: list[np.ndarray] = []
    hist_g: list[np.ndarray] = []
    for it in range(1, max_iter + 1):
        if min_depth(G.eta_star + f) <= 0:
            raise DepthViolation("iterate left the strip: min(eta + b) <= 0")
        g = G(f)
        step = _norm(g - f)
        if anderson > 0:
            hist_f.append(f.real_coeffs())
            hist_g.append(g.real_coeffs())
            hist_f, hist_g = hist_f[-anderson - 1 :], hist_g[-anderson - 1 :]
            g = SurfaceField.from_real_coeffs(grid, _anderson_step(hist_f, hist_g, anderson))
        if prev is not None and prev > 0:
            r = step / prev
            ratios.append(r)
            bad = bad + 1 if r >= 1 else 0
            if bad >= 3:
                raise NoContraction(f"fixed-point ratio >= 1 for 3 consecutive iterations (gamma = {G.gamma})", ratios)
        log.debug("iteration %d step %.3e", it, step)
        prev = step
        f = g
        if step <= tol:
            break
    else:
        raise MaxIterExceeded(f"no fixed point within {max_iter} iterations (last step {prev:.3e})")
    defect = _norm(G(f) - f)
    eta_w = G.eta_star + f
    residual = G.residual(eta_w)
    result = TravelingWaveResult(
        eta_star=G.eta_star,
        f=f,
        gamma=G.gamma,
        iterations=it,
        contraction_ratios=ratios,
        residual=residual,
        converged=True,
        fixed_point_defect=defect,
        mass_log=list(G.mass_log),
        model=G.model,
    )
    if residual > 10 * tol:
        raise ResidualTooLarge(f"wave equation residual {residual:.3e} exceeds 10 x tol = {10 * tol:.1e}")
    return result


def g_map(f: SurfaceField, gamma: float, phi: SurfaceField, params: CapGravParams, eta_star: SurfaceField | None = None) -> SurfaceField:
    """One application of G_gamma (builds its own operators)."""
    return StokesTravelingMap(phi, gamma, params, eta_star)(f)


def f_map(f: SurfaceField, gamma: float, phi: SurfaceField, params: CapGravParams, eta_star: SurfaceField | None = None) -> SurfaceField:
    """One application of F_gamma (builds its own operators)."""
    return NavierStokesTravelingMap(phi, gamma, params, eta_star)(f)


def solve_traveling_stokes(
    phi: SurfaceField,
    gamma: float,
    params: CapGravParams,
    tol: float = 1e-10,
    max_iter: int = 100,
    f0: SurfaceField | None = None,
    anderson: int = 0,
    eta_star: SurfaceField | None = None,
) -> TravelingWaveResult:
    G = StokesTravelingMap(phi, gamma, params, eta_star)
    return iterate_map(G, tol, max_iter, f0, anderson)


def solve_traveling_ns(
    phi: SurfaceField,
    gamma: float,
    params: CapGravParams,
    tol: float = 1e-10,
    max_iter: int = 100,
    f0: SurfaceField | None = None,
    anderson: int = 0,
    eta_star: SurfaceField | None = None,
) -> TravelingWaveResult:
    G = NavierStokesTravelingMap(phi, gamma, params, eta_star)
    return iterate_map(G, tol, max_iter, f0, anderson)


@dataclass(eq=False)
class ContinuationReport:
    results: list
    frontier: float

    @property
    def converged(self) -> list:
        return [r for r in self.results if r.converged]


def continuation_in_gamma(
    phi: SurfaceField,
    gamma_targets,
    params: CapGravParams,
    tol: float = 1e-10,
    model: str = "stokes",
    max_iter: int = 100,
) -> ContinuationReport:
    """Warm-started sweep; failures are recorded and the sweep continues."""
    targets = [float(g) for g in gamma_targets]
    if any(abs(a) > abs(b) for a, b in zip(targets, targets[1:])):
        raise ValueError("gamma targets must be sorted by |gamma|")
    solver = {"stokes": solve_traveling_stokes, "navier-stokes": solve_traveling_ns}[model]
    eta_star = capgrav_solve(phi, params)
    results = []
    f0 = None
    frontier = 0.0
    failed = False
    for gamma in targets:
        try:
            res = solver(phi, gamma, params, tol, max_iter, f0=f0, eta_star=eta_star)
            f0 = res.f
            if not failed:
                frontier = max(frontier, abs(gamma))
        except StokesWaveError as exc:
            failed = True
            res = TravelingWaveResult(
                eta_star=eta_star,
                f=SurfaceField.zeros(phi.grid),
                gamma=gamma,
                converged=False,
                model=model,
                error=f"{type(exc).__name__}: {exc}",
            )
        results.append(res)
    return ContinuationReport(results=results, frontier=frontier)


def reflection_defect(a: TravelingWaveResult, b: TravelingWaveResult) -> float:
    """max |eta_a(x) - eta_b(-x)| on the grid."""
    va = a.eta_w.values
    vb = b.eta_w.values
    reflected = np.roll(vb[::-1], 1)
    return float(np.max(np.abs(va - reflected)))
