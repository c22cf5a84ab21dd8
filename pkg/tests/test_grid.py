from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from csslab.grid import (
    EquivariantField,
    apply_laplacian,
    build_grid,
    charge,
    charge_fraction_inside,
    cumulative,
    field_from_function,
    gradient_sq,
    h1m_seminorm_sq,
    inner,
    interpolate_profile,
    l2_norm,
    l4_norm_4,
    laplacian_bands,
    load_field,
    radial_derivative,
    radial_derivative_matrix,
    random_profile,
    save_field,
    strauss_ratio,
    tail,
)


def gaussian(m, width=1.0):
    return lambda r: (r**m * np.exp(-(r**2) / (2 * width**2))).astype(complex)


def test_build_grid_cell_centres():
    g = build_grid(10.0, 100)
    assert g.h == pytest.approx(0.1)
    np.testing.assert_allclose(g.r[:3], [0.05, 0.15, 0.25])
    np.testing.assert_allclose(g.w, g.r * g.h)
    assert g.faces.shape == (99,)


@pytest.mark.parametrize("r_max, n", [(0.0, 100), (-1.0, 100), (10.0, 8), (10.0, 100.5)])
def test_build_grid_rejects_bad_input(r_max, n):
    with pytest.raises(ValueError):
        build_grid(r_max, n)


def test_field_validation():
    g = build_grid(10.0, 32)
    with pytest.raises(ValueError):
        EquivariantField(g, -1, np.zeros(32))
    with pytest.raises(ValueError):
        EquivariantField(g, 0, np.zeros(31))
    with pytest.raises(ValueError):
        EquivariantField(g, 0, np.full(32, np.nan))
    with pytest.raises(ValueError):
        EquivariantField(g, 0, np.zeros(32)) + EquivariantField(g, 1, np.zeros(32))


@pytest.mark.parametrize("m", [0, 1, 2])
def test_charge_matches_quad(m, grid_medium):
    f = field_from_function(gaussian(m), grid_medium, m)
    exact = 2 * np.pi * quad(lambda r: r ** (2 * m + 1) * np.exp(-(r**2)), 0, np.inf)[0]
    assert charge(f) == pytest.approx(exact, rel=2e-5)
    assert l2_norm(f) ** 2 == pytest.approx(charge(f), rel=1e-14)
    if m == 0:
        # for m >= 1 the integrand is odd at the axis and the midpoint rule superconverges
        coarse = field_from_function(gaussian(m), build_grid(grid_medium.r_max, grid_medium.n // 2), m)
        ratio = abs(charge(coarse) - exact) / abs(charge(f) - exact)
        assert 3.5 < ratio < 4.5


def test_l4_matches_quad(grid_medium):
    f = field_from_function(gaussian(1), grid_medium, 1)
    exact = 2 * np.pi * quad(lambda r: r**5 * np.exp(-2 * r**2), 0, np.inf)[0]
    assert l4_norm_4(f) == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("m", [0, 1, 3])
def test_cumulative_matches_quad(m, grid_medium):
    g = grid_medium
    F = g.r ** (2 * m) * np.exp(-(g.r**2))
    got = cumulative(g, m, F)
    for k in (200, 400, 1000):
        exact = quad(lambda s: s ** (2 * m + 1) * np.exp(-(s**2)), 0, g.r[k])[0]
        assert got[k] == pytest.approx(exact, rel=1e-4)


@pytest.mark.parametrize("m", [0, 1, 3])
def test_first_half_cell_exact_for_axis_power_law(m, grid_medium):
    g = grid_medium
    got = cumulative(g, m, g.r ** (2 * m))
    assert got[0] == pytest.approx(g.r[0] ** (2 * m + 2) / (2 * m + 2), rel=1e-13)


@pytest.mark.parametrize("m", [0, 2])
def test_tail_is_weighted_transpose_of_cumulative(m):
    g = build_grid(5.0, 200)
    rng = np.random.default_rng(1)
    F, G = rng.normal(size=200), rng.normal(size=200)
    lhs = np.sum(g.w * cumulative(g, m, F) * G / g.r)
    rhs = np.sum(g.w * F * tail(g, m, G))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_tail_matches_quad(grid_medium):
    g = grid_medium
    got = tail(g, 0, np.exp(-g.r))
    assert got[500] == pytest.approx(np.exp(-g.r[500]) - np.exp(-g.r_max), rel=1e-5)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_laplacian_weighted_symmetric_and_form(m):
    g = build_grid(10.0, 64)
    ab = laplacian_bands(g, m, decay=1.5)
    L = np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)
    WL = g.w[:, None] * L
    np.testing.assert_allclose(WL, WL.T, atol=1e-12 * np.abs(WL).max())
    f = field_from_function(gaussian(m), build_grid(10.0, 64), m)
    form = -2 * np.pi * np.sum(g.w * f.u.real * apply_laplacian(f.u.real, g, m))
    assert form == pytest.approx(h1m_seminorm_sq(f), rel=1e-12)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_laplacian_converges_on_gaussian(m):
    # Delta_m (r^m e^{-r^2/2}) = (r^2 - 2m - 2) r^m e^{-r^2/2}
    errs = []
    for n in (1024, 2048):
        g = build_grid(12.0, n)
        u = g.r**m * np.exp(-(g.r**2) / 2)
        exact = (g.r**2 - 2 * m - 2) * u
        inner_cells = g.r < 8
        diff = (apply_laplacian(u, g, m) - exact)[inner_cells]
        errs.append(np.sqrt(np.sum(g.w[inner_cells] * diff**2)))
    assert 3.5 < errs[0] / errs[1] < 4.5


@pytest.mark.parametrize("m", [0, 1])
def test_radial_derivative_and_matrix(m, grid_medium):
    g = grid_medium
    u = g.r**m * np.exp(-(g.r**2) / 2)
    du = (m * g.r ** (m - 1) if m else 0.0) * np.exp(-(g.r**2) / 2) - g.r ** (m + 1) * np.exp(-(g.r**2) / 2)
    d = radial_derivative(u, g, m)
    assert np.max(np.abs(d - du)) < 1e-4
    np.testing.assert_allclose(radial_derivative_matrix(g, m) @ u, d, atol=1e-12)


def test_gradient_sq_matches_quad(grid_medium):
    f = field_from_function(gaussian(0), grid_medium, 0)
    exact = 2 * np.pi * quad(lambda r: r**3 * np.exp(-(r**2)), 0, np.inf)[0]
    assert gradient_sq(f) == pytest.approx(exact, rel=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.integers(0, 3))
def test_norms_are_phase_invariant(theta, m):
    g = build_grid(20.0, 256)
    f = field_from_function(gaussian(m, 2.0), g, m)
    h = np.exp(1j * theta) * f
    assert charge(h) == pytest.approx(charge(f), rel=1e-13)
    assert h1m_seminorm_sq(h) == pytest.approx(h1m_seminorm_sq(f), rel=1e-13)
    assert inner(h, f) == pytest.approx(np.cos(theta) * charge(f), abs=1e-12 * charge(f))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 3.0))
def test_strauss_ratio_scale_invariant(lam):
    g = build_grid(60.0, 8192)
    f = field_from_function(gaussian(1), g, 1)
    fl = field_from_function(lambda r: lam * gaussian(1)(lam * r), g, 1)
    assert strauss_ratio(fl) == pytest.approx(strauss_ratio(f), rel=2e-3)


def test_interpolation_reproduces_smooth_profile(grid_medium):
    f = EquivariantField(grid_medium, 1, gaussian(1)(grid_medium.r))
    r = np.linspace(0.0, 6.0, 301)
    np.testing.assert_allclose(interpolate_profile(f, r), gaussian(1)(r), atol=1e-9)


def test_charge_fraction_inside(grid_medium):
    f = field_from_function(gaussian(0), grid_medium, 0)
    radius = 100 * grid_medium.h
    assert charge_fraction_inside(f, radius) == pytest.approx(1 - np.exp(-(radius**2)), rel=1e-4)


def test_random_profile_is_reproducible():
    g = build_grid(20.0, 256)
    a = random_profile(np.random.default_rng(3), g, 2)
    b = random_profile(np.random.default_rng(3), g, 2)
    np.testing.assert_array_equal(a.u, b.u)
    assert abs(a.u[0]) < 1e-2 * np.max(np.abs(a.u))


def test_save_load_round_trip(tmp_path):
    g = build_grid(10.0, 64)
    f = field_from_function(lambda r: (1 + 2j) * gaussian(1)(r), g, 1)
    save_field(tmp_path / "f", f, {"extra": g.r})
    back = load_field(tmp_path / "f.csv")
    assert back.m == 1 and back.grid.same_as(g)
    np.testing.assert_array_equal(back.u, f.u)
