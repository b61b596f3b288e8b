import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cos_field
from oracles import curvature_closed_form, jacobian_dense
from stokeswave.errors import DepthViolation, JacobianDegenerate
from stokeswave.geometry import build_geometry, mean_curvature, min_depth, slope_operator
from stokeswave.spectral import GridSpec, SurfaceField

G = GridSpec(32, 16)


def test_flat_surface_is_identity_map():
    geo = build_geometry(SurfaceField.zeros(G))
    assert np.allclose(geo.jac, 1.0, atol=1e-13)
    assert np.allclose(geo.rho.values[0], G.z[None, :], atol=1e-14)
    assert np.allclose(geo.normal[0].values, 0.0)
    assert np.allclose(geo.B.values[0], 1.0, atol=1e-13)


def test_constant_surface_stretches_uniformly():
    geo = build_geometry(SurfaceField.constant(G, 0.25))
    assert np.allclose(geo.jac, 1.25, atol=1e-12)
    assert geo.depth == pytest.approx(1.25)


def test_jacobian_matches_pointwise_oracle_on_refined_grid():
    eta = cos_field(G, 0.4)
    geo = build_geometry(eta)
    fine, _, _, J = geo.fine_fields(4)
    exact = jacobian_dense(0.4, geo.delta, G.b, fine.x, fine.z)
    assert np.max(np.abs(J - exact)) < 1e-12
    assert np.min(exact) >= geo.depth / (2 * G.b) - 1e-14


def test_inverse_jacobian_identity():
    geo = build_geometry(cos_field(G, 0.4) + cos_field(G, 0.1, 3))
    assert geo.inverse_jacobian_defect() < 1e-12


def test_metric_lower_bound():
    geo = build_geometry(cos_field(G, 0.5))
    B = geo.B.values[0]
    assert np.all(B >= 1.0 / np.max(geo.jac) ** 2 - 1e-12)


def test_depth_violation():
    with pytest.raises(DepthViolation):
        build_geometry(cos_field(G, 1.2))
    with pytest.raises(DepthViolation):
        build_geometry(SurfaceField.constant(G, -1.0))


def test_explicit_delta_too_large_is_rejected():
    with pytest.raises(JacobianDegenerate):
        build_geometry(cos_field(G, 0.8), delta=50.0)


def test_min_depth_uses_oversampling():
    eta = cos_field(G, 0.3)
    assert min_depth(eta) == pytest.approx(0.7, abs=1e-12)


def test_curvature_matches_closed_form():
    g = GridSpec(64, 8)
    for amp in (0.1, 0.3):
        H = mean_curvature(cos_field(g, amp))
        assert np.max(np.abs(H.values - curvature_closed_form(amp, g.x))) < 1e-9


def test_curvature_of_constant_is_zero():
    assert np.array_equal(mean_curvature(SurfaceField.constant(G, 0.3)).values, np.zeros(G.Nx))


def test_curvature_linear_limit():
    eta = cos_field(G, 1e-6, 3)
    H = mean_curvature(eta)
    assert np.allclose(H.values, 9e-6 * np.cos(3 * G.x), atol=1e-16)


def test_slope_operator_differentiates_resolved_modes():
    S, w = slope_operator(G.Nx)
    M = S.shape[0]
    xp = 2 * np.pi * np.arange(M) / M
    assert w == pytest.approx(G.Nx / M)
    assert np.allclose(S @ np.sin(2 * G.x), 2 * np.cos(2 * xp), atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.1, 0.1), min_size=2, max_size=10))
def test_curvature_has_zero_mean(c):
    eta = SurfaceField.from_real_coeffs(G, np.array(c))
    assert abs(mean_curvature(eta).mean) < 1e-14


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-0.15, 0.15), min_size=2, max_size=8))
def test_jacobian_bound_holds_for_admissible_surfaces(c):
    eta = SurfaceField.from_real_coeffs(G, np.array(c))
    geo = build_geometry(eta)
    assert geo.jac_lower_bound >= geo.depth / (2 * G.b)
    assert geo.inverse_jacobian_defect() < 1e-10
