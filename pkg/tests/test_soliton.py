from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from csslab.gauge import energy_bogomolnyi, potentials
from csslab.grid import build_grid, charge, field_from_function, h1m_seminorm_sq, l2_norm
from csslab.soliton import (
    SolitonSpec,
    apply_phase,
    apply_scaling,
    pc_profile,
    pc_soliton_exact,
    soliton_charge,
    soliton_field,
    soliton_lambda_q,
    soliton_profile,
    soliton_q,
    soliton_q_dr,
)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_soliton_charge_symbolic(m):
    r = sp.symbols("r", positive=True)
    q = sp.sqrt(8) * (m + 1) * r**m / (1 + r ** (2 * m + 2))
    total = 2 * sp.pi * sp.integrate(q**2 * r, (r, 0, sp.oo))
    assert sp.simplify(total - 8 * sp.pi * (m + 1)) == 0
    assert soliton_charge(m) == pytest.approx(float(total))


@pytest.mark.parametrize("m", [0, 1, 2])
def test_derivative_and_generator_closed_forms(m):
    r = np.linspace(0.05, 5.0, 200)
    h = 1e-6
    fd = (soliton_q(r + h, m) - soliton_q(r - h, m)) / (2 * h)
    np.testing.assert_allclose(soliton_q_dr(r, m), fd, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(soliton_lambda_q(r, m), soliton_q(r, m) + r * fd, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("lam", [0.5, 1.7])
def test_scaling_preserves_charge_and_scales_seminorm(lam, grid_fine):
    q = soliton_profile(1, grid_fine)
    ql = apply_scaling(q, lam)
    assert charge(ql) == pytest.approx(charge(q), rel=1e-4)
    assert h1m_seminorm_sq(ql) == pytest.approx(lam**2 * h1m_seminorm_sq(q), rel=1e-3)
    np.testing.assert_allclose(ql.u, lam * soliton_q(lam * grid_fine.r, 1), atol=1e-14)


def test_scaling_without_source_uses_interpolation(grid_medium):
    q = soliton_profile(1, grid_medium)
    plain = q.with_values(q.u)
    a, b = apply_scaling(q, 1.3), apply_scaling(plain, 1.3)
    # samples are only known up to r_max; keep clear of the spline end condition
    inside = grid_medium.r * 1.3 < 0.75 * grid_medium.r_max
    assert np.max(np.abs(a.u - b.u)[inside]) < 1e-7


def test_scaling_warns_when_pushing_charge_out():
    g = build_grid(10.0, 1024)
    with pytest.warns(UserWarning, match="r_max"):
        apply_scaling(soliton_profile(0, g), 0.05)


def test_phase_and_spec_validation(grid_medium):
    q = soliton_profile(2, grid_medium)
    np.testing.assert_allclose(apply_phase(q, 0.7).u, np.exp(0.7j) * q.u)
    with pytest.raises(ValueError):
        SolitonSpec(m=-1)
    with pytest.raises(ValueError):
        SolitonSpec(lam=0.0)
    with pytest.raises(ValueError):
        SolitonSpec(T=-1.0)
    with pytest.raises(ValueError):
        apply_scaling(q, -2.0)


def test_soliton_field_composes_scale_and_phase(grid_medium):
    f = soliton_field(SolitonSpec(m=1, lam=2.0, gamma=0.4), grid_medium)
    np.testing.assert_allclose(f.u, np.exp(0.4j) * 2.0 * soliton_q(2.0 * grid_medium.r, 1), atol=1e-14)


def test_pc_at_time_zero_is_chirped_soliton(grid_medium):
    r = grid_medium.r
    f = pc_soliton_exact(SolitonSpec(m=1, T=1.0), 0.0, grid_medium)
    np.testing.assert_allclose(f.u, np.exp(-1j * r**2 / 4) * soliton_q(r, 1), atol=1e-14)


def test_pc_keeps_charge_and_concentrates(grid_fine):
    spec = SolitonSpec(m=1, T=1.0)
    c0 = charge(pc_soliton_exact(spec, 0.0, grid_fine))
    f = pc_soliton_exact(spec, 0.5, grid_fine)
    assert charge(f) == pytest.approx(c0, rel=1e-5)
    assert np.max(np.abs(f.u)) == pytest.approx(2 * np.max(soliton_q(np.linspace(0, 3, 30001), 1)), rel=1e-3)
    with pytest.raises(ValueError):
        pc_profile(spec, 1.0)
    with pytest.raises(ValueError):
        pc_profile(SolitonSpec(m=1), 0.0)


def test_pc_time_derivative_solves_free_plus_gauge_symbolically():
    # PC of a static solution solves the same equation: check the closed form
    # against i u_t + u_rr + u_r/r - ((m + A)^2/r^2 + A_0 - |u|^2) u = 0 pointwise.
    m = 1
    r, t = sp.symbols("r t", positive=True)
    tau = 1 - t
    rho = r / tau
    qm = sp.sqrt(8) * (m + 1) * rho**m / (1 + rho ** (2 * m + 2))
    u = sp.exp(-sp.I * r**2 / (4 * tau)) * qm / tau
    tt = rho ** (2 * m + 2)
    at = -2 * (m + 1) * tt / (1 + tt)
    s = sp.symbols("s", positive=True)
    qs = sp.sqrt(8) * (m + 1) * s**m / (1 + s ** (2 * m + 2))
    ats = -2 * (m + 1) * s ** (2 * m + 2) / (1 + s ** (2 * m + 2))
    a0_static = -sp.integrate(sp.simplify((m + ats) * qs**2 / s), (s, rho, sp.oo))
    a0 = a0_static / tau**2
    expr = sp.I * sp.diff(u, t) + sp.diff(u, r, 2) + sp.diff(u, r) / r - ((m + at) ** 2 / r**2 + a0 - qm**2 / tau**2) * u
    for rv, tv in [(0.7, 0.2), (1.3, 0.5), (2.1, 0.1)]:
        assert abs(complex(expr.subs({r: rv, t: tv}).evalf())) < 1e-10


def test_self_dual_energy_of_soliton_is_tiny(grid_fine):
    q = soliton_profile(1, grid_fine)
    assert abs(energy_bogomolnyi(q, potentials(q))) < 1e-6 * h1m_seminorm_sq(q)


def test_gaussian_has_positive_energy(grid_medium):
    f = field_from_function(lambda r: (r * np.exp(-(r**2))).astype(complex), grid_medium, 1)
    assert energy_bogomolnyi(f) > 0
