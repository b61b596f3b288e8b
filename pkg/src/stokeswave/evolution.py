"""Moving-frame surface evolution ``d_t eta = gamma d_x eta + Psi_0[eta](C(eta) + phi) + eps d_x^2 eta``.

C is the capillary-gravity operator.  Two integrators are provided: classical
RK4 and a linearly implicit Euler step whose Jacobian is frozen at a reference
surface (``gamma d_x + Psi_0[eta_ref] T_{eta_ref} + eps d_x^2``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .capgrav import CapGravParams, TEtaOperator, capgrav_apply
from .errors import StepRejected, StokesWaveError
from .geometry import build_geometry, min_depth
from .nsnd import PsiOperator
from .spectral import SurfaceField, deriv_x, inner, sobolev_norm

log = logging.getLogger(__name__)

SCHEMES = ("rk4_explicit", "imex_frozen")
GROWTH_LIMIT = 10.0
GROWTH_FLOOR = 1e-6
FIT_FRACTION = 0.5


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    T_final: float
    epsilon: float = 0.0
    scheme: str = "rk4_explicit"
    record_every: int = 1
    s_index: int = 2
    A_weight: float = 1.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T_final >= self.dt:
            raise ValueError("T_final must be at least dt")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.T_final / self.dt))


@dataclass(frozen=True)
class DecayFit:
    c0: float
    M2: float
    window: tuple
    residual: float
    energy_nonincreasing: bool


@dataclass(eq=False)
class EvolutionTrace:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    norms: list = field(default_factory=list)
    means: list = field(default_factory=list)
    depths: list = field(default_factory=list)
    decay_fit: DecayFit | None = None
    note: str | None = None

    @property
    def norm_values(self) -> np.ndarray:
        return np.array([n[0] for n in self.norms])

    @property
    def energies(self) -> np.ndarray:
        return np.array([n[1] for n in self.norms])

    def rows(self):
        """CSV rows (t, norm_hs1, energy, mean_eta, min_depth)."""
        for t, (n, e), m, d in zip(self.times, self.norms, self.means, self.depths):
            yield (t, n, e, m, d)


def rhs(
    eta: SurfaceField,
    gamma: float,
    phi: SurfaceField,
    params: CapGravParams,
    epsilon: float = 0.0,
    reference: PsiOperator | None = None,
) -> SurfaceField:
    """Right-hand side of the moving-frame surface equation."""
    geo = build_geometry(eta)
    psi = PsiOperator(geo, 0.0, reference=reference)
    out = psi.apply(capgrav_apply(eta, params) + phi)
    if gamma:
        out = out + deriv_x(eta, 1) * gamma
    if epsilon:
        out = out + deriv_x(eta, 2) * epsilon
    return out


def energy(
    f: SurfaceField,
    eta_star: SurfaceField,
    params: CapGravParams,
    A_weight: float = 1.0,
    s_index: int = 2,
    op: TEtaOperator | None = None,
) -> float:
    """E = A/2 <f, T f> + 1/2 <d^{s+1} f, T d^{s+1} f> with T = T_{eta_*}; f mean-zero."""
    op = op or TEtaOperator(eta_star, params)
    high = deriv_x(f, s_index + 1)
    return 0.5 * A_weight * inner(op.apply(f), f) + 0.5 * inner(op.apply(high), high)


def linear_operator(
    eta_ref: SurfaceField, gamma: float, params: CapGravParams, epsilon: float = 0.0, psi: PsiOperator | None = None
) -> np.ndarray:
    """Grid-value matrix of gamma d_x + Psi_0[eta_ref] T_{eta_ref} + eps d_x^2."""
    grid = eta_ref.grid
    psi = psi or PsiOperator(build_geometry(eta_ref), 0.0)
    sys = psi.stress_system
    P = sys.E @ psi.apply_values(np.eye(grid.Nx))
    L = P @ TEtaOperator(eta_ref, params).matrix
    L = L + gamma * grid.Dx + epsilon * (grid.Dx @ grid.Dx)
    return L


class _Stepper:
    def __init__(self, gamma, phi, params, config, reference_eta):
        self.gamma = gamma
        self.phi = phi
        self.params = params
        self.config = config
        self.psi_ref = PsiOperator(build_geometry(reference_eta), 0.0)
        self.psi_ref.stress_system.factor()
        if config.scheme == "imex_frozen":
            L = linear_operator(reference_eta, gamma, params, config.epsilon, self.psi_ref)
            self._lu = sla.lu_factor(np.eye(L.shape[0]) - config.dt * L)

    def f(self, eta):
        return rhs(eta, self.gamma, self.phi, self.params, self.config.epsilon, self.psi_ref)

    def step(self, eta: SurfaceField) -> SurfaceField:
        dt = self.config.dt
        if self.config.scheme == "rk4_explicit":
            k1 = self.f(eta)
            k2 = self.f(eta + k1 * (0.5 * dt))
            k3 = self.f(eta + k2 * (0.5 * dt))
            k4 = self.f(eta + k3 * dt)
            return eta + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
        r = self.f(eta).values * dt
        return eta + SurfaceField.from_values(eta.grid, sla.lu_solve(self._lu, r))


def evolve(
    eta0: SurfaceField,
    gamma: float,
    phi: SurfaceField,
    config: EvolutionConfig,
    params: CapGravParams,
    reference: SurfaceField | None = None,
) -> EvolutionTrace:
    """Integrate from eta0; norms and energy measure eta - reference (default eta0's mean)."""
    ref = reference if reference is not None else SurfaceField.constant(eta0.grid, eta0.mean)
    if min_depth(eta0) <= 0:
        from .errors import DepthViolation

        raise DepthViolation("initial surface leaves the strip")
    stepper = _Stepper(gamma, phi, params, config, ref)
    T_ref = TEtaOperator(ref, params)
    trace = EvolutionTrace()

    def measure(eta):
        f = eta - ref
        return sobolev_norm(f, config.s_index + 1), energy(f, ref, params, config.A_weight, config.s_index, T_ref)

    def record(t, eta, nrm):
        trace.times.append(float(t))
        trace.states.append(eta)
        trace.norms.append(nrm)
        trace.means.append(eta.mean)
        trace.depths.append(min_depth(eta))

    eta = eta0
    nrm = measure(eta)
    record(0.0, eta, nrm)
    n = config.n_steps
    for i in range(1, n + 1):
        try:
            new = stepper.step(eta)
        except StokesWaveError as exc:
            trace.note = f"{type(exc).__name__} at t = {i * config.dt:.6g}: {exc}"
            raise StepRejected(trace.note, trace) from exc
        new_nrm = measure(new)
        if not np.all(np.isfinite(new.values)) or not np.isfinite(new_nrm[0]):
            trace.note = f"non-finite state at t = {i * config.dt:.6g}"
            raise StepRejected(trace.note, trace)
        if new_nrm[0] > GROWTH_LIMIT * max(nrm[0], GROWTH_FLOOR):
            trace.note = f"norm grew from {nrm[0]:.3e} to {new_nrm[0]:.3e} in one step at t = {i * config.dt:.6g}"
            raise StepRejected(trace.note, trace)
        eta, nrm = new, new_nrm
        if i % config.record_every == 0 or i == n:
            record(i * config.dt, eta, nrm)
            log.debug("t = %.4f norm = %.3e", i * config.dt, nrm[0])
    return trace


def fit_decay(trace: EvolutionTrace, fraction: float = FIT_FRACTION) -> DecayFit | None:
    """Least-squares fit of log ||f(t)|| over the trailing part of the trace."""
    t = np.asarray(trace.times)
    y = trace.norm_values
    if y[0] == 0 or np.any(y <= 0):
        return None
    sel = t >= t[-1] - fraction * (t[-1] - t[0])
    if sel.sum() < 3:
        return None
    ly = np.log(y[sel])
    slope, intercept = np.polyfit(t[sel], ly, 1)
    resid = ly - (slope * t[sel] + intercept)
    span = float(np.ptp(ly))
    rel = float(np.max(np.abs(resid)) / span) if span > 0 else float("inf")
    E = trace.energies[sel]
    nonincreasing = bool(np.all(np.diff(E) <= 1e-10 * max(E[0], 1e-300)))
    return DecayFit(
        c0=float(-slope),
        M2=float(np.exp(intercept) / y[0]),
        window=(float(t[sel][0]), float(t[sel][-1])),
        residual=rel,
        energy_nonincreasing=nonincreasing,
    )


def stability_experiment(
    eta_w: SurfaceField,
    gamma: float,
    phi: SurfaceField,
    f0: SurfaceField,
    config: EvolutionConfig,
    params: CapGravParams,
) -> EvolutionTrace:
    """Evolve eta_w + f0 and fit the decay of ||eta(t) - eta_w||_{H^{s+1}}."""
    trace = evolve(eta_w + f0, gamma, phi, config, params, reference=eta_w)
    trace.decay_fit = fit_decay(trace)
    return trace
