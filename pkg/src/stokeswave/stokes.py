"""Flattened gamma-Stokes solver on the reference strip.

Unknowns are the real Fourier coefficients (Nyquist mode excluded) of the
velocity ``(u, w)`` and pressure ``p`` at every Chebyshev node.  Equations are
Galerkin projections in x of the collocated residuals in z:

* momentum (multiplied by J, viscous stress in divergence form) at interior
  nodes,
* divergence ``d_x(J u) + d_z(w - rho_x u) = J g`` at every node,
* surface conditions replacing the top momentum rows,
* no-slip replacing the bottom momentum rows.

Collocated PN-PN discretizations carry a spurious pressure mode
``T_{Nz-1}(t) - 1`` (x-independent).  It is fixed by bordering: one gauge row
on its Chebyshev coefficient and one column adding ``tau * T_{Nz-1}`` to the
x-mean divergence rows.  The Navier problem also borders the constant pressure
(zero-mean row) with a multiplier on the mean of the ``v.N = h`` row.  Both
multipliers vanish whenever the data are compatible.
"""

from __future__ import annotations

import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import (
    CompatibilityViolation,
    NoContraction,
    ResidualTooLarge,
    SingularSystem,
)
from .geometry import FlatteningGeometry, build_geometry
from .spectral import (
    GridSpec,
    SurfaceField,
    VolumeField,
    chebyshev_interp_matrix,
    chebyshev_tn_functional,
    dealias_values,
    real_basis_analysis,
    real_basis_derivative,
    real_basis_synthesis,
)

RCOND_MIN = 1e-15
RESIDUAL_RTOL = 1e-6
PICARD_FLOOR = 1e-11
_ASSEMBLY_CHUNK = 512


# ---------------------------------------------------------------- problem data


@dataclass(frozen=True, eq=False)
class Stress:
    """Prescribed stress ``(pI - Dv) N = k`` on the surface."""

    k: tuple[SurfaceField, SurfaceField]


@dataclass(frozen=True, eq=False)
class Navier:
    """Tangential stress ``l`` (orthogonal to N) and normal velocity ``v.N = h``."""

    l: tuple[SurfaceField, SurfaceField]
    h: SurfaceField


@dataclass(frozen=True, eq=False)
class StokesProblem:
    geometry: FlatteningGeometry
    gamma: float
    bc: Stress | Navier
    f: VolumeField | None = None
    g: VolumeField | None = None
    allow_large_gamma: bool = False


@dataclass(frozen=True, eq=False)
class StokesSolution:
    v: VolumeField
    p: VolumeField
    residuals: dict = field(default_factory=dict)
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    contraction_ratios: tuple = ()
    system: "StokesSystem | None" = None
    coeffs: np.ndarray | None = None

    def surface_normal_velocity(self) -> SurfaceField:
        """Galerkin-projected trace v.N on the surface."""
        return self.system.normal_trace(self.coeffs)

    def surface_normal_stress(self) -> SurfaceField:
        """Scalar chi with (pI - Dv)N . N / |N|^2 on the surface."""
        return self.system.normal_stress(self.coeffs)


# ---------------------------------------------------------------- discrete system


class StokesSystem:
    """Bordered collocation operator for one geometry, speed and boundary type."""

    def __init__(self, geometry: FlatteningGeometry, gamma: float, kind: str):
        if kind not in ("stress", "navier"):
            raise ValueError(f"unknown boundary type {kind!r}")
        self.geometry = geometry
        self.grid = geometry.grid
        self.gamma = float(gamma)
        self.kind = kind
        g = self.grid
        self.m = g.Nx - 1
        self.nz = g.Nz
        self.nf = self.m * self.nz
        self.n_border = 1 if kind == "stress" else 2
        self.size = 3 * self.nf + self.n_border
        self.E = real_basis_synthesis(g.Nx, g.x)
        self.Q = real_basis_analysis(g.Nx)
        self.Dk = real_basis_derivative(g.Nx)
        self.Dz = g.Dz
        self.J = geometry.jac
        self.rx = geometry.rho_x
        self.a21 = geometry.a21
        self.a22 = geometry.a22
        self.etax = geometry.eta_x
        self.tn = chebyshev_tn_functional(g.Nz)
        self.tn_profile = (-1.0) ** np.arange(g.Nz)
        self._lu = None
        self.rcond = None

    # --- field helpers (trailing batch axis) ---------------------------------
    def _synth(self, c: np.ndarray) -> np.ndarray:
        s = c.shape
        return (self.E @ c.reshape(self.m, -1)).reshape((self.grid.Nx,) + s[1:])

    def _analyse(self, v: np.ndarray) -> np.ndarray:
        s = v.shape
        return (self.Q @ v.reshape(self.grid.Nx, -1)).reshape((self.m,) + s[1:])

    def _dk(self, c: np.ndarray) -> np.ndarray:
        s = c.shape
        return (self.Dk @ c.reshape(self.m, -1)).reshape(s)

    def _dz(self, v: np.ndarray) -> np.ndarray:
        return np.matmul(self.Dz, v)

    def split(self, X: np.ndarray):
        X = X.reshape(self.size, -1)
        core = X[: 3 * self.nf].reshape(3, self.m, self.nz, -1)
        return core[0], core[1], core[2], X[3 * self.nf :]

    def grid_fields(self, X: np.ndarray):
        """Velocity, pressure and their derivatives on the collocation grid."""
        cu, cw, cp, _ = self.split(X)
        u, w, p = self._synth(cu), self._synth(cw), self._synth(cp)
        ux, wx, px = self._synth(self._dk(cu)), self._synth(self._dk(cw)), self._synth(self._dk(cp))
        uz, wz, pz = self._dz(u), self._dz(w), self._dz(p)
        return u, w, p, ux, uz, wx, wz, px, pz

    def _stress(self, ux, uz, wx, wz):
        a21 = self.a21[..., None]
        a22 = self.a22[..., None]
        PXu = ux + a21 * uz
        PYu = a22 * uz
        PXw = wx + a21 * wz
        PYw = a22 * wz
        S11 = -2.0 * PXu
        S12 = -(PYu + PXw)
        S22 = -2.0 * PYw
        return PXu, PXw, S11, S12, S22

    # --- operator ------------------------------------------------------------
    def apply(self, X: np.ndarray) -> np.ndarray:
        """Matrix-free product with the bordered system (X: size or size x B)."""
        single = X.ndim == 1
        X = X.reshape(self.size, -1)
        cu, cw, cp, border = self.split(X)
        u, w, p, ux, uz, wx, wz, px, pz = self.grid_fields(X)
        PXu, PXw, S11, S12, S22 = self._stress(ux, uz, wx, wz)
        J = self.J[..., None]
        rx = self.rx[..., None]
        gam = self.gamma

        Ru = self._dk(self._analyse(J * S11)) + self._analyse(
            self._dz(S12 - rx * S11) + J * px - rx * pz - gam * J * PXu
        )
        Rw = self._dk(self._analyse(J * S12)) + self._analyse(
            self._dz(S22 - rx * S12) + pz - gam * J * PXw
        )
        Rd = self._dk(self._analyse(J * u)) + self._analyse(self._dz(w - rx * u))

        ex = self.etax[:, None]
        top = (slice(None), 0)
        if self.kind == "stress":
            Ru[:, 0] = self.Q @ (-ex * (p[top] + S11[top]) + S12[top])
            Rw[:, 0] = self.Q @ (p[top] - ex * S12[top] + S22[top])
        else:
            n1 = -ex * S11[top] + S12[top]
            n2 = -ex * S12[top] + S22[top]
            Ru[:, 0] = self.Q @ (n1 + ex * n2)
            Rw[:, 0] = self.Q @ (-ex * u[top] + w[top])
        Ru[:, -1] = cu[:, -1]
        Rw[:, -1] = cw[:, -1]

        # bordering
        tau = border[0]
        Rd[0] += self.tn_profile[:, None] * tau[None, :]
        rows = [self.tn @ cp[0]]
        if self.kind == "navier":
            mu = border[1]
            Rw[0, 0] += mu
            rows.append(self.grid.wz @ self._analyse(J * p)[0])
        out = np.concatenate([Ru.reshape(self.nf, -1), Rw.reshape(self.nf, -1), Rd.reshape(self.nf, -1), np.array(rows)])
        return out[:, 0] if single else out

    def assemble(self) -> np.ndarray:
        M = np.empty((self.size, self.size))
        for start in range(0, self.size, _ASSEMBLY_CHUNK):
            stop = min(start + _ASSEMBLY_CHUNK, self.size)
            I = np.zeros((self.size, stop - start))
            I[np.arange(start, stop), np.arange(stop - start)] = 1.0
            M[:, start:stop] = self.apply(I)
        return M

    def factor(self) -> "StokesSystem":
        if self._lu is None:
            M = self.assemble()
            # Row then column equilibration: the raw rows mix O(Nz^4) viscous
            # entries with O(1) boundary entries.
            r = 1.0 / np.max(np.abs(M), axis=1)
            M *= r[:, None]
            c = 1.0 / np.max(np.abs(M), axis=0)
            M *= c[None, :]
            anorm = np.linalg.norm(M, 1)
            lu, piv = sla.lu_factor(M, overwrite_a=True, check_finite=False)
            rcond, info = sla.lapack.dgecon(lu, anorm, norm="1")
            self.rcond = float(rcond)
            if info != 0 or not np.isfinite(rcond) or rcond < RCOND_MIN:
                raise SingularSystem(f"discrete Stokes matrix is singular (rcond = {rcond:.2e})")
            self._lu = (lu, piv, r, c)
        return self

    @property
    def factored(self) -> bool:
        return self._lu is not None

    def lu_solve(self, b: np.ndarray) -> np.ndarray:
        lu, piv, r, c = self._lu
        rb = r[:, None] * b if b.ndim == 2 else r * b
        y = sla.lu_solve((lu, piv), rb, check_finite=False)
        return c[:, None] * y if b.ndim == 2 else c * y

    # --- right-hand sides ----------------------------------------------------
    def rhs(
        self,
        top: tuple[np.ndarray, np.ndarray],
        f: np.ndarray | None = None,
        g: np.ndarray | None = None,
    ) -> np.ndarray:
        """Assemble data.  ``top`` holds grid values of the two surface rows."""
        Ru = np.zeros((self.m, self.nz))
        Rw = np.zeros((self.m, self.nz))
        Rd = np.zeros((self.m, self.nz))
        if f is not None:
            Ru = self._analyse(self.J * f[0])
            Rw = self._analyse(self.J * f[1])
        if g is not None:
            Rd = self._analyse(self.J * g)
        Ru[:, 0] = self.Q @ top[0]
        Rw[:, 0] = self.Q @ top[1]
        Ru[:, -1] = 0.0
        Rw[:, -1] = 0.0
        return np.concatenate([Ru.ravel(), Rw.ravel(), Rd.ravel(), np.zeros(self.n_border)])

    # --- solves --------------------------------------------------------------
    def solve(self, b: np.ndarray, reference: "StokesSystem | None" = None, tol: float = 1e-13):
        """Direct solve if factored; otherwise preconditioned by ``reference``."""
        if self._lu is not None:
            return self.lu_solve(b), 0
        if reference is None or not reference.factored:
            self.factor()
            return self.lu_solve(b), 0
        return _preconditioned_solve(self, reference, b, tol)

    # --- boundary traces -----------------------------------------------------
    def normal_trace(self, X: np.ndarray) -> SurfaceField:
        cu, cw, _, _ = self.split(X)
        u0 = self.E @ cu[:, 0, 0]
        w0 = self.E @ cw[:, 0, 0]
        c = self.Q @ (-self.etax * u0 + w0)
        return SurfaceField.from_real_coeffs(self.grid, c)

    def normal_stress(self, X: np.ndarray) -> SurfaceField:
        u, w, p, ux, uz, wx, wz, px, pz = self.grid_fields(X)
        _, _, S11, S12, S22 = self._stress(ux, uz, wx, wz)
        ex = self.etax
        n1 = -ex * S11[:, 0, 0] + S12[:, 0, 0]
        n2 = -ex * S12[:, 0, 0] + S22[:, 0, 0]
        chi = p[:, 0, 0] + (n1 * (-ex) + n2) / (1.0 + ex**2)
        return SurfaceField.from_real_coeffs(self.grid, self.Q @ chi)

    def fields(self, X: np.ndarray) -> tuple[VolumeField, VolumeField]:
        cu, cw, cp, _ = self.split(X)
        v = np.stack([self._synth(cu)[..., 0], self._synth(cw)[..., 0]])
        return VolumeField(self.grid, v), VolumeField(self.grid, self._synth(cp)[..., 0])

    def convective_forcing(self, X: np.ndarray) -> np.ndarray:
        """-(v . grad) v on the grid in physical derivatives, 2/3-rule dealiased in x."""
        u, w, p, ux, uz, wx, wz, px, pz = self.grid_fields(X)
        d = lambda a: dealias_values(self.grid, a[..., 0], axis=0)  # noqa: E731
        u, w = d(u), d(w)
        PXu = d(ux + self.a21[..., None] * uz)
        PYu = d(self.a22[..., None] * uz)
        PXw = d(wx + self.a21[..., None] * wz)
        PYw = d(self.a22[..., None] * wz)
        fu = -(u * PXu + w * PYu)
        fw = -(u * PXw + w * PYw)
        return np.stack([dealias_values(self.grid, fu), dealias_values(self.grid, fw)])


def _preconditioned_solve(system: StokesSystem, ref: StokesSystem, b: np.ndarray, tol: float):
    """GMRES on the equilibrated system, right-preconditioned by the reference LU."""
    lu, piv, r, c = ref._lu
    rb = r * b
    bnorm = np.linalg.norm(rb)
    if bnorm == 0:
        return np.zeros_like(b), 0
    count = [0]

    def precond(y):
        return sla.lu_solve((lu, piv), y, check_finite=False)

    def mv(y):
        count[0] += 1
        return r * system.apply(c * precond(y))

    op = LinearOperator((system.size, system.size), matvec=mv, dtype=float)
    x = np.zeros_like(b)
    res = rb
    for _ in range(4):
        y, _ = gmres(op, res, rtol=tol * bnorm / max(np.linalg.norm(res), 1e-300), atol=0.0, restart=40, maxiter=2)
        x = x + c * precond(y)
        res = rb - r * system.apply(x)
        if np.linalg.norm(res) <= tol * bnorm:
            break
    if np.linalg.norm(res) > 1e3 * tol * bnorm and np.linalg.norm(res) > 1e-10 * bnorm:
        # The reference is too far from this geometry: factor directly.
        system.factor()
        return system.lu_solve(b), count[0]
    return x, count[0]


# ---------------------------------------------------------------- cache


class _SystemCache:
    """Small LRU of factored systems keyed by geometry identity."""

    def __init__(self, maxsize: int = 8):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def get(self, geometry: FlatteningGeometry, gamma: float, kind: str) -> StokesSystem:
        key = (id(geometry), float(gamma), kind)
        with self._lock:
            hit = self._data.get(key)
            if hit is not None and hit.geometry is geometry:
                self._data.move_to_end(key)
                return hit
        system = StokesSystem(geometry, gamma, kind).factor()
        with self._lock:
            self._data[key] = system
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)
        return system

    def clear(self) -> None:
        with self._lock:
            self._data.clear()


system_cache = _SystemCache()


def get_system(geometry: FlatteningGeometry, gamma: float, kind: str) -> StokesSystem:
    return system_cache.get(geometry, gamma, kind)


# ---------------------------------------------------------------- residual check


def fine_residuals(system: StokesSystem, X: np.ndarray, problem: StokesProblem) -> dict:
    """Re-substitute the spectral interpolant on a 2x refined grid."""
    geom = system.geometry
    fine, rho, rx, J = geom.fine_fields(2)
    Ef = real_basis_synthesis(system.grid.Nx, fine.x)
    W = chebyshev_interp_matrix(system.nz, fine.t)
    Dkf = system.Dk
    cu, cw, cp, _ = system.split(X)
    cu, cw, cp = cu[..., 0], cw[..., 0], cp[..., 0]

    def ev(c):
        return Ef @ c @ W.T

    u, w, p = ev(cu), ev(cw), ev(cp)
    ux, wx, px = ev(Dkf @ cu), ev(Dkf @ cw), ev(Dkf @ cp)
    Dzf = fine.Dz
    uz, wz, pz = u @ Dzf.T, w @ Dzf.T, p @ Dzf.T
    a21 = -rx / J
    a22 = 1.0 / J
    PXu, PYu = ux + a21 * uz, a22 * uz
    PXw, PYw = wx + a21 * wz, a22 * wz
    S11, S12, S22 = -2 * PXu, -(PYu + PXw), -2 * PYw
    Dxf = fine.Dx
    gam = system.gamma

    fu = fw = gg = 0.0
    if problem.f is not None:
        fv = problem.f.interpolate(fine.x, fine.z)
        fu, fw = fv[0], fv[1]
    if problem.g is not None:
        gg = problem.g.interpolate(fine.x, fine.z)[0]

    mom_u = Dxf @ (J * S11) + (S12 - rx * S11) @ Dzf.T + J * px - rx * pz - gam * J * PXu - J * fu
    mom_w = Dxf @ (J * S12) + (S22 - rx * S12) @ Dzf.T + pz - gam * J * PXw - J * fw
    div = Dxf @ (J * u) + (w - rx * u) @ Dzf.T - J * gg
    inner = slice(1, -1)

    ex = -problem.geometry.normal[0].evaluate(fine.x)
    top = (slice(None), 0)
    n1 = -ex * S11[top] + S12[top]
    n2 = -ex * S12[top] + S22[top]
    bc = problem.bc
    if isinstance(bc, Stress):
        k1 = bc.k[0].evaluate(fine.x)
        k2 = bc.k[1].evaluate(fine.x)
        bc_res = max(np.max(np.abs(n1 - ex * p[top] - k1)), np.max(np.abs(n2 + p[top] - k2)))
    else:
        l1 = bc.l[0].evaluate(fine.x)
        l2 = bc.l[1].evaluate(fine.x)
        tang = n1 + ex * n2 - (l1 + ex * l2)
        norm = -ex * u[top] + w[top] - bc.h.evaluate(fine.x)
        bc_res = max(np.max(np.abs(tang)), np.max(np.abs(norm)))
    noslip = max(np.max(np.abs(u[:, -1])), np.max(np.abs(w[:, -1])))
    b = system.grid.b
    return {
        "momentum": float(b * max(np.max(np.abs(mom_u[:, inner])), np.max(np.abs(mom_w[:, inner])))),
        "divergence": float(b * np.max(np.abs(div))),
        "bc": float(bc_res),
        "noslip": float(noslip),
    }


def data_scale(problem: StokesProblem) -> float:
    b = problem.geometry.grid.b
    parts = [0.0]
    bc = problem.bc
    if isinstance(bc, Stress):
        parts += [bc.k[0].max_abs(), bc.k[1].max_abs()]
    else:
        parts += [bc.l[0].max_abs(), bc.l[1].max_abs(), bc.h.max_abs()]
    if problem.f is not None:
        parts.append(b * float(np.max(np.abs(problem.f.values))))
    if problem.g is not None:
        parts.append(b * float(np.max(np.abs(problem.g.values))))
    return max(parts)


# ---------------------------------------------------------------- gamma* heuristic


def korn_poincare_constant(geometry: FlatteningGeometry, Nx: int = 16, Nz: int = 12) -> float:
    """Discrete sup of ||v||_{H^1}^2 / ||Dv||^2 over velocities vanishing at the bottom."""
    g = geometry.grid
    coarse = GridSpec(min(Nx, g.Nx), min(Nz, g.Nz), g.b)
    geo = build_geometry(geometry.eta.resample(coarse), coarse)
    n = coarse.Nx * coarse.Nz
    keep = np.ones((coarse.Nx, coarse.Nz), bool)
    keep[:, -1] = False
    idx = np.flatnonzero(keep.ravel())
    Ix, Iz = np.eye(coarse.Nx), np.eye(coarse.Nz)
    DX = np.kron(coarse.Dx, Iz)
    DZ = np.kron(Ix, coarse.Dz)
    PX = DX + geo.a21.ravel()[:, None] * DZ
    PY = geo.a22.ravel()[:, None] * DZ
    wts = (geo.jac * (2 * np.pi / coarse.Nx) * coarse.wz[None, :]).ravel()
    Z = np.zeros((n, n))
    Id = np.eye(n)
    # v = (u, w) stacked; gradients of each component
    Gu = [np.hstack([PX, Z]), np.hstack([PY, Z])]
    Gw = [np.hstack([Z, PX]), np.hstack([Z, PY])]
    V = [np.hstack([Id, Z]), np.hstack([Z, Id])]

    def form(ops):
        return sum(op.T @ (wts[:, None] * op) for op in ops)

    sym = [2 * Gu[0], Gu[1] + Gw[0], Gu[1] + Gw[0], 2 * Gw[1]]
    Dform = form(sym)
    H1 = form(V + Gu + Gw)
    sel = np.concatenate([idx, n + idx])
    Dform = Dform[np.ix_(sel, sel)]
    H1 = H1[np.ix_(sel, sel)]
    lam = sla.eigh(Dform, H1, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(1.0 / lam)


def gamma_star(geometry: FlatteningGeometry) -> float:
    return 1.0 / (4.0 * korn_poincare_constant(geometry))


def _check_gamma(problem: StokesProblem) -> None:
    if problem.gamma == 0 or problem.allow_large_gamma:
        return
    gs = gamma_star(problem.geometry)
    if abs(problem.gamma) > gs:
        warnings.warn(
            f"|gamma| = {abs(problem.gamma):.3g} exceeds the discrete estimate gamma* = {gs:.3g}",
            RuntimeWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------- public solves


def _solve(problem: StokesProblem, kind: str, check: bool, system: StokesSystem | None) -> StokesSolution:
    _check_gamma(problem)
    geom = problem.geometry
    system = system or get_system(geom, problem.gamma, kind)
    f = None if problem.f is None else problem.f.values
    g = None if problem.g is None else problem.g.values[0]
    bc = problem.bc
    if kind == "stress":
        top = (bc.k[0].values, bc.k[1].values)
    else:
        ex = geom.eta_x
        top = (bc.l[0].values + ex * bc.l[1].values, bc.h.values)
    X, its = system.solve(system.rhs(top, f, g))
    v, p = system.fields(X)
    residuals = fine_residuals(system, X, problem) if check else {}
    if check:
        scale = max(data_scale(problem), 1e-300)
        worst = max(residuals.values())
        if worst > RESIDUAL_RTOL * scale:
            raise ResidualTooLarge(f"re-substitution residual {worst:.3e} exceeds {RESIDUAL_RTOL:.0e} x {scale:.3e}")
    return StokesSolution(v=v, p=p, residuals=residuals, multipliers=X[3 * system.nf :].copy(), iterations=its, system=system, coeffs=X)


def solve_stress(problem: StokesProblem, check: bool = True, system: StokesSystem | None = None) -> StokesSolution:
    if not isinstance(problem.bc, Stress):
        raise TypeError("solve_stress needs a Stress boundary condition")
    return _solve(problem, "stress", check, system)


def _check_navier(problem: StokesProblem) -> None:
    geom = problem.geometry
    bc = problem.bc
    ex = geom.eta_x
    l1, l2 = bc.l[0].values, bc.l[1].values
    lscale = max(np.max(np.abs(l1)), np.max(np.abs(l2)), 1.0)
    if np.max(np.abs(-ex * l1 + l2)) > 1e-10 * lscale:
        raise CompatibilityViolation("tangential data l is not orthogonal to the normal")
    flux = bc.h.mean
    if problem.g is not None:
        G = problem.g.values[0] * geom.jac
        flux_g = float(np.mean(G, axis=0) @ geom.grid.wz)
    else:
        flux_g = 0.0
    hscale = max(bc.h.max_abs(), 1.0)
    if abs(flux - flux_g) > 1e-10 * hscale:
        raise CompatibilityViolation(f"mean(h) = {flux:.3e} differs from the divergence flux {flux_g:.3e}")


def solve_navier(problem: StokesProblem, check: bool = True, system: StokesSystem | None = None) -> StokesSolution:
    if not isinstance(problem.bc, Navier):
        raise TypeError("solve_navier needs a Navier boundary condition")
    _check_navier(problem)
    return _solve(problem, "navier", check, system)


# ---------------------------------------------------------------- Navier-Stokes


def picard(
    system: StokesSystem,
    rhs_data: np.ndarray,
    tol: float,
    reference: StokesSystem | None = None,
    max_iter: int = 60,
) -> tuple[np.ndarray, list[float], int]:
    """Fixed point of X = S^{-1}(data + forcing(X)) with forcing = -(v.grad)v."""
    X, _ = system.solve(rhs_data, reference)
    ratios: list[float] = []
    prev_step = None
    bad = 0
    for it in range(1, max_iter + 1):
        f = system.convective_forcing(X)
        b = rhs_data + _forcing_rows(system, f)
        Xn, _ = system.solve(b, reference)
        step = float(np.linalg.norm(Xn - X))
        scale = max(float(np.linalg.norm(Xn)), 1e-300)
        X = Xn
        if step <= tol * scale or step == 0.0:
            return X, ratios, it
        if prev_step is not None and prev_step > 0:
            ratio = step / prev_step
            ratios.append(ratio)
            if ratio >= 1 and step <= PICARD_FLOOR * scale:
                # Stagnation at the linear-solve roundoff floor.
                return X, ratios, it
            bad = bad + 1 if ratio >= 1 else 0
            if bad >= 3:
                raise NoContraction("Picard ratio >= 1 for 3 consecutive iterations", ratios)
        prev_step = step
    raise NoContraction(f"Picard iteration did not reach tol in {max_iter} iterations", ratios)


def _forcing_rows(system: StokesSystem, f: np.ndarray) -> np.ndarray:
    Ru = system._analyse(system.J * f[0])
    Rw = system._analyse(system.J * f[1])
    Ru[:, 0] = Ru[:, -1] = 0.0
    Rw[:, 0] = Rw[:, -1] = 0.0
    return np.concatenate([Ru.ravel(), Rw.ravel(), np.zeros(system.nf + system.n_border)])


def solve_navier_stokes_stress(
    geometry: FlatteningGeometry,
    gamma: float,
    chi: SurfaceField,
    tol: float = 1e-12,
    reference: StokesSystem | None = None,
    system: StokesSystem | None = None,
) -> StokesSolution:
    """gamma-Navier-Stokes with stress chi N by Picard iteration on the Stokes solve."""
    if system is None:
        system = StokesSystem(geometry, gamma, "stress") if reference is not None else get_system(geometry, gamma, "stress")
    n1, n2 = geometry.normal
    top = (chi.values * n1.values, chi.values * n2.values)
    b = system.rhs(top)
    X, ratios, its = picard(system, b, tol, reference if not system.factored else None)
    v, p = system.fields(X)
    return StokesSolution(v=v, p=p, iterations=its, contraction_ratios=tuple(ratios), system=system, coeffs=X)


def solve_navier_stokes_navier(
    geometry: FlatteningGeometry,
    gamma: float,
    h: SurfaceField,
    tol: float = 1e-12,
    reference: StokesSystem | None = None,
    system: StokesSystem | None = None,
) -> StokesSolution:
    """gamma-Navier-Stokes with v.N = h and zero tangential stress."""
    if system is None:
        system = StokesSystem(geometry, gamma, "navier") if reference is not None else get_system(geometry, gamma, "navier")
    top = (np.zeros(geometry.grid.Nx), h.values)
    b = system.rhs(top)
    X, ratios, its = picard(system, b, tol, reference if not system.factored else None)
    v, p = system.fields(X)
    return StokesSolution(v=v, p=p, iterations=its, contraction_ratios=tuple(ratios), system=system, coeffs=X)
