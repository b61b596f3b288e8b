import numpy as np
import pytest

from conftest import cos_field
from stokeswave.errors import StepRejected
from stokeswave.evolution import (
    EvolutionConfig,
    energy,
    evolve,
    fit_decay,
    linear_operator,
    rhs,
    stability_experiment,
)
from stokeswave.spectral import SurfaceField, sobolev_norm


@pytest.mark.parametrize(
    "kw",
    [
        dict(dt=0.0, T_final=1.0),
        dict(dt=0.1, T_final=0.01),
        dict(dt=0.1, T_final=1.0, epsilon=-1.0),
        dict(dt=0.1, T_final=1.0, scheme="euler"),
        dict(dt=0.1, T_final=1.0, record_every=0),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EvolutionConfig(**kw)


def test_rhs_vanishes_at_equilibrium(phi03, params, eta_star03):
    assert rhs(eta_star03, 0.0, phi03, params).max_abs() < 1e-12


def test_rhs_vanishes_at_traveling_wave(phi03, params, stokes_waves):
    assert rhs(stokes_waves[0.01].eta_w, 0.01, phi03, params).max_abs() < 1e-10


def test_rhs_linearization_matches_operator(phi03, params, eta_star03):
    L = linear_operator(eta_star03, 0.0, params)
    h = cos_field(phi03.grid, 1.0, 2)
    t = 1e-6
    fd = (rhs(eta_star03 + h * t, 0.0, phi03, params) - rhs(eta_star03 + h * (-t), 0.0, phi03, params)) * (0.5 / t)
    assert np.max(np.abs(fd.values - L @ h.values)) < 1e-7


def test_linearization_is_stable(params, eta_star03):
    lam = np.linalg.eigvals(linear_operator(eta_star03, 0.01, params))
    lam = lam[np.argsort(-lam.real)]
    # One zero eigenvalue from mass conservation; the rest decay.
    assert abs(lam[0]) < 1e-8
    assert np.all(lam[1:].real < 0)


def test_energy_positive_and_quadratic(params, eta_star03):
    f = cos_field(eta_star03.grid, 1e-3, 1)
    e1 = energy(f, eta_star03, params)
    e2 = energy(f * 2.0, eta_star03, params)
    assert e1 > 0
    assert e2 / e1 == pytest.approx(4.0, rel=1e-12)
    assert energy(SurfaceField.zeros(eta_star03.grid), eta_star03, params) == 0.0


def test_mass_is_conserved(phi03, params, eta_star03):
    eta0 = eta_star03 + cos_field(phi03.grid, 0.02, 2)
    tr = evolve(eta0, 0.0, phi03, EvolutionConfig(dt=0.05, T_final=0.5), params, reference=eta_star03)
    assert np.max(np.abs(np.array(tr.means) - tr.means[0])) < 1e-12
    assert min(tr.depths) > 0


def test_imex_matches_rk4_at_small_step(phi03, params, eta_star03):
    eta0 = eta_star03 + cos_field(phi03.grid, 0.01, 1)
    ends = {}
    for scheme, dt in (("rk4_explicit", 0.05), ("imex_frozen", 0.005)):
        cfg = EvolutionConfig(dt=dt, T_final=0.5, scheme=scheme)
        ends[scheme] = evolve(eta0, 0.0, phi03, cfg, params, reference=eta_star03).states[-1]
    gap = sobolev_norm(ends["rk4_explicit"] - ends["imex_frozen"], 0)
    assert gap < 0.05 * sobolev_norm(ends["rk4_explicit"] - eta_star03, 0)


def test_imex_is_first_order(phi03, params, eta_star03):
    eta0 = eta_star03 + cos_field(phi03.grid, 0.01, 1)
    ref = evolve(eta0, 0.0, phi03, EvolutionConfig(dt=0.05, T_final=0.5), params, reference=eta_star03).states[-1]
    err = [
        sobolev_norm(
            evolve(eta0, 0.0, phi03, EvolutionConfig(dt=dt, T_final=0.5, scheme="imex_frozen"), params, reference=eta_star03).states[-1]
            - ref,
            0,
        )
        for dt in (0.05, 0.025)
    ]
    assert err[0] / err[1] == pytest.approx(2.0, rel=0.15)


def test_unstable_step_is_rejected_with_partial_trace(phi03, params, eta_star03):
    eta0 = eta_star03 + cos_field(phi03.grid, 0.01, 8)
    with pytest.raises(StepRejected) as info:
        evolve(eta0, 0.0, phi03, EvolutionConfig(dt=2.0, T_final=40.0), params, reference=eta_star03)
    trace = info.value.trace
    assert trace is not None and len(trace.times) >= 1
    assert trace.note


def test_decay_fit_and_energy(phi03, params, stokes_waves):
    w = stokes_waves[0.01]
    cfg = EvolutionConfig(dt=0.1, T_final=4.0)
    tr = stability_experiment(w.eta_w, 0.01, phi03, cos_field(phi03.grid, 1e-3), cfg, params)
    fit = tr.decay_fit
    assert fit.c0 > 0
    assert fit.residual < 0.05
    assert fit.energy_nonincreasing
    assert fit_decay(tr).c0 == pytest.approx(fit.c0)


def test_trace_rows_have_five_columns(phi03, params, eta_star03):
    tr = evolve(eta_star03, 0.0, phi03, EvolutionConfig(dt=0.1, T_final=0.3), params, reference=eta_star03)
    rows = list(tr.rows())
    assert len(rows) == 4 and all(len(r) == 5 for r in rows)
    assert rows[-1][0] == pytest.approx(0.3)
