import numpy as np
import pytest

from conftest import FLAT_SYMBOL, cos_field
from oracles import symbol_closed_form, symbol_collocation
from stokeswave.errors import NonZeroMean
from stokeswave.geometry import build_geometry
from stokeswave.nsnd import (
    PsiOperator,
    asymmetry,
    coercivity_constant,
    commutator_defect,
    flat_strip_symbol,
    phi_apply,
    phi_inverse_apply,
    psi_apply,
    psi_inverse_apply,
    psi_matrix,
    xi_apply,
)
from stokeswave.spectral import GridSpec, SurfaceField, sobolev_norm

G = GridSpec(32, 16)


@pytest.fixture(scope="module")
def curved():
    return PsiOperator(build_geometry(cos_field(G, 0.3)))


@pytest.mark.parametrize("k", range(1, 9))
def test_frozen_symbol_reproduced_by_both_oracles(k):
    assert symbol_closed_form(k) == pytest.approx(FLAT_SYMBOL[k], rel=1e-14)
    assert symbol_collocation(k) == pytest.approx(FLAT_SYMBOL[k], rel=1e-10)
    assert flat_strip_symbol(k) == pytest.approx(FLAT_SYMBOL[k], rel=1e-12)


def test_flat_symbol_deep_limit():
    assert flat_strip_symbol(20, b=1.0) == pytest.approx(1 / 40, rel=1e-12)
    assert flat_strip_symbol(0) == 0.0


def test_flat_operator_is_diagonal():
    op = PsiOperator(build_geometry(SurfaceField.zeros(G)))
    M = op.matrix(10)
    assert np.allclose(M - np.diag(np.diag(M)), 0.0, atol=1e-12)
    k = (np.arange(10) + 2) // 2
    assert np.allclose(-np.diag(M), [FLAT_SYMBOL[j] for j in k], rtol=1e-9)


def test_constant_stress_gives_no_flow(curved):
    assert curved.apply(SurfaceField.constant(G, 2.0)).max_abs() < 1e-12


def test_linearity(curved):
    a = cos_field(G, 1.0, 2)
    b = SurfaceField.from_function(G, lambda x: np.sin(3 * x))
    lhs = psi_apply(curved, a * 2.0 + b * (-0.5))
    rhs = psi_apply(curved, a) * 2.0 + psi_apply(curved, b) * (-0.5)
    assert np.allclose(lhs.values, rhs.values, atol=1e-13)


def test_output_is_mean_zero(curved):
    h = curved.apply(SurfaceField.from_function(G, lambda x: np.exp(np.cos(x))))
    assert abs(h.mean) < 1e-13


def test_inverse_rejects_nonzero_mean(curved):
    with pytest.raises(NonZeroMean):
        psi_inverse_apply(curved, SurfaceField.constant(G, 1.0))


def test_round_trip_low_modes(curved):
    chi = cos_field(G, 1.0, 1) + cos_field(G, 0.3, 2)
    back = psi_inverse_apply(curved, psi_apply(curved, chi))
    assert sobolev_norm(back - chi, 0) < 1e-9


def test_matrix_symmetric_and_negative(curved):
    M = psi_matrix(curved, 12)
    assert asymmetry(M) < 1e-6
    assert np.max(np.linalg.eigvalsh(0.5 * (M + M.T))) < 0
    assert coercivity_constant(M) > 0


def test_asymmetry_decays_with_resolution():
    # Symmetry is exact in the continuum; at fixed Nx the defect is z-truncation error.
    a = [asymmetry(PsiOperator(build_geometry(cos_field(GridSpec(32, n), 0.3))).matrix(12)) for n in (16, 32)]
    assert a[1] < 1e-10 < a[0]


def test_matrix_mode_bounds(curved):
    with pytest.raises(ValueError):
        curved.matrix(0)
    with pytest.raises(ValueError):
        curved.matrix(G.Nx)


def test_reference_preconditioned_operator_matches_direct(curved):
    geo = build_geometry(cos_field(G, 0.32))
    direct = PsiOperator(geo)
    pre = PsiOperator(geo, reference=curved)
    chi = SurfaceField.from_function(G, lambda x: np.sin(x) + 0.2 * np.cos(2 * x))
    assert np.allclose(pre.apply(chi).values, direct.apply(chi).values, atol=1e-11)


def test_commutator_vanishes_on_flat_surface():
    op = PsiOperator(build_geometry(SurfaceField.zeros(G)))
    chi = cos_field(G, 1.0, 2) + cos_field(G, 0.5, 5)
    assert commutator_defect(op, chi, 2) < 1e-10


def test_commutator_normalized_is_bounded():
    chi = cos_field(G, 1.0, 2)
    vals = [
        commutator_defect(PsiOperator(build_geometry(cos_field(G, e))), chi, 1, normalize=True) for e in (0.05, 0.1)
    ]
    assert vals[0] == pytest.approx(vals[1], rel=0.15)


def test_navier_stokes_operator_reduces_to_stokes_at_small_data(curved):
    chi = cos_field(G, 1e-4, 1)
    lin = curved.apply(chi)
    nl = phi_apply(curved.geometry, 0.0, chi)
    assert sobolev_norm(nl - lin, 0) < 1e-10 * 1e2


def test_navier_stokes_inverse_round_trip(curved):
    chi = cos_field(G, 0.05, 1) + cos_field(G, 0.02, 2)
    h = phi_apply(curved.geometry, 0.01, chi)
    back = phi_inverse_apply(curved.geometry, 0.01, h)
    assert sobolev_norm(back - chi, 0) < 1e-9


def test_xi_rejects_nonzero_mean(curved):
    with pytest.raises(NonZeroMean):
        xi_apply(curved.geometry, 0.0, SurfaceField.constant(G, 0.5))
