import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stokeswave.spectral import (
    GridSpec,
    SurfaceField,
    VolumeField,
    chebyshev_interp_matrix,
    clenshaw_curtis_weights,
    dealiased_product,
    deriv_x,
    inner,
    project_mean_zero,
    smooth_lift,
    sobolev_norm,
)

G = GridSpec(32, 16)

coeff_lists = st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=21)


def field_from(coeffs):
    return SurfaceField.from_real_coeffs(G, np.array(coeffs))


@pytest.mark.parametrize(
    "kw",
    [dict(Nx=7, Nz=16), dict(Nx=6, Nz=16), dict(Nx=32, Nz=7), dict(Nx=32, Nz=16, b=0.0)],
)
def test_gridspec_rejects_invalid(kw):
    with pytest.raises(ValueError):
        GridSpec(**kw)


def test_chebyshev_points_map_to_strip():
    g = GridSpec(16, 12, b=2.5)
    assert g.z[0] == pytest.approx(0.0, abs=1e-15)
    assert g.z[-1] == pytest.approx(-2.5)
    assert np.all(np.diff(g.z) < 0)


def test_chebyshev_derivative_exact_on_polynomials():
    g = GridSpec(8, 12, b=1.7)
    z = g.z
    assert np.allclose(g.Dz @ z**5, 5 * z**4, atol=1e-11)


def test_clenshaw_curtis_integrates_polynomials():
    for n in (9, 12):
        w = clenshaw_curtis_weights(n)
        t = np.cos(np.pi * np.arange(n) / (n - 1))
        assert w @ t**4 == pytest.approx(2 / 5, rel=1e-13)
        assert w.sum() == pytest.approx(2.0, rel=1e-14)


def test_deriv_x_examples():
    u = SurfaceField.from_function(G, np.cos)
    assert np.allclose(deriv_x(u, 1).values, -np.sin(G.x), atol=1e-13)
    assert np.allclose(deriv_x(SurfaceField.constant(G, 4.0), 3).values, 0.0)
    c3 = SurfaceField.from_function(G, lambda x: np.cos(3 * x))
    assert np.allclose(deriv_x(c3, 2).values, -9 * np.cos(3 * G.x), atol=1e-12)


def test_smooth_lift_examples():
    u = SurfaceField.from_function(G, np.cos)
    assert np.allclose(smooth_lift(u, 1.0, 0.0).values, u.values)
    assert np.allclose(smooth_lift(u, 1.0, -1.0).values, np.exp(-1) * np.cos(G.x), atol=1e-14)
    c = SurfaceField.constant(G, 2.0)
    assert np.allclose(smooth_lift(c, 0.7, -0.9).values, 2.0)


def test_sobolev_norm_examples():
    assert sobolev_norm(SurfaceField.zeros(G), 1.0) == 0.0
    u = SurfaceField.from_function(G, np.cos)
    assert sobolev_norm(u, 0) == pytest.approx(np.sqrt(np.pi), rel=1e-14)
    assert sobolev_norm(u, 1) == pytest.approx(np.sqrt(2) * np.sqrt(np.pi), rel=1e-14)


def test_project_mean_zero_examples():
    u = SurfaceField.from_function(G, lambda x: 3 + np.cos(x))
    p = project_mean_zero(u)
    assert np.allclose(p.values, np.cos(G.x), atol=1e-14)
    assert np.array_equal(project_mean_zero(p).coeffs, p.coeffs)


def test_surface_rejects_non_hermitian():
    c = np.zeros(G.Nx, complex)
    c[1] = 1.0
    with pytest.raises(ValueError):
        SurfaceField(G, c)


def test_evaluate_matches_grid_values():
    u = SurfaceField.from_function(G, lambda x: np.exp(np.sin(x)) * 0.1)
    assert np.allclose(u.evaluate(G.x), u.values, atol=1e-14)


def test_volume_field_interpolation_consistent():
    g = GridSpec(16, 12)
    v = VolumeField.from_function(g, lambda x, z: np.cos(x) * (1 + z) ** 3)
    assert v.ncomp == 1
    vals = v.interpolate(g.x, g.z)
    assert np.allclose(vals, v.values, rtol=1e-12, atol=1e-13)
    xs, zs = np.array([0.3, 2.0]), np.array([-0.25, -0.8])
    exact = np.cos(xs)[:, None] * (1 + zs[None, :]) ** 3
    assert np.allclose(v.interpolate(xs, zs)[0], exact, atol=1e-12)


def test_chebyshev_interp_identity_on_nodes():
    g = GridSpec(8, 10)
    W = chebyshev_interp_matrix(10, g.t)
    assert np.allclose(W, np.eye(10), atol=1e-14)


def test_dealiased_product_of_low_modes_is_exact():
    u = SurfaceField.from_function(G, np.cos)
    v = SurfaceField.from_function(G, lambda x: np.sin(2 * x))
    w = dealiased_product(u, v)
    assert np.allclose(w.values, np.cos(G.x) * np.sin(2 * G.x), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(coeff_lists)
def test_transform_round_trip(c):
    u = field_from(c)
    back = SurfaceField.from_values(G, u.values)
    scale = max(u.max_abs(), 1e-300)
    assert np.max(np.abs(back.values - u.values)) <= 1e-12 * scale + 1e-300
    assert np.allclose(back.real_coeffs()[: len(c)], c, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(coeff_lists, st.floats(-2, 2), st.floats(0, 3))
def test_sobolev_norm_monotone_in_s(c, s1, ds):
    u = field_from(c)
    assert sobolev_norm(u, s1) <= sobolev_norm(u, s1 + ds) * (1 + 1e-14)


@settings(max_examples=50, deadline=None)
@given(coeff_lists, st.floats(0.01, 2.0), st.floats(-1.0, 0.0), st.integers(1, 3))
def test_deriv_commutes_with_lift(c, delta, z, order):
    u = field_from(c)
    a = deriv_x(smooth_lift(u, delta, z), order)
    b = smooth_lift(deriv_x(u, order), delta, z)
    assert np.allclose(a.coeffs, b.coeffs, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(coeff_lists)
def test_projection_idempotent_and_mean_free(c):
    p = project_mean_zero(field_from(c))
    assert p.mean == 0.0
    assert np.array_equal(project_mean_zero(p).coeffs, p.coeffs)


@settings(max_examples=30, deadline=None)
@given(coeff_lists, coeff_lists)
def test_inner_product_matches_quadrature(a, b):
    u, v = field_from(a), field_from(b)
    quad = 2 * np.pi / G.Nx * np.sum(u.values * v.values)
    assert inner(u, v) == pytest.approx(quad, abs=1e-12)
