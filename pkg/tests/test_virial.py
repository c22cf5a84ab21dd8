from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from csslab.evolve import SimConfig, evolve
from csslab.grid import build_grid, field_from_function, random_profile
from csslab.soliton import soliton_profile
from csslab.virial import (
    CUTOFF_CONSTANT_MAX,
    cauchy_schwarz_gap,
    conformal_cooperation,
    cutoff_constant,
    cutoff_profile,
    make_cutoff,
    rate_bound,
    virial,
    virial_accel_check,
    virial_probes,
    virial_rate,
    virial_rate_nodal,
)


def gaussian_packet(m, k=0.0):
    return lambda r: (r**m * np.exp(-(r**2) / 2 + 1j * k * r**2)).astype(complex)


def test_blend_matches_quadratic_to_second_order_and_vanishes_symbolically():
    s = sp.symbols("s")
    p = (1 - s) ** 3 * (13 * s**2 + 5 * s + 1)
    quad_cont = (1 + s) ** 2  # r^2/R^2 with r = R (1 + s)
    for k in range(3):
        assert sp.diff(p - quad_cont, s, k).subs(s, 0) == 0
        assert sp.diff(p, s, k).subs(s, 1) == 0


def test_cutoff_constant_bounded_and_scale_free():
    c = cutoff_constant()
    assert 4.0 <= c <= CUTOFF_CONSTANT_MAX
    assert cutoff_constant(3.7) == pytest.approx(c, rel=1e-6)
    r = np.linspace(0, 4, 4001)
    chi, dchi = cutoff_profile(r, 2.0)
    np.testing.assert_allclose(chi[r < 2], r[r < 2] ** 2)
    assert np.all(chi[r >= 4] == 0) and np.all(dchi[r >= 4] == 0)
    assert np.all(dchi[1:] ** 2 <= c * chi[1:] * (1 + 1e-9) + 1e-15)


def test_make_cutoff_rejects_bad_radius():
    g = build_grid(10.0, 256)
    with pytest.raises(ValueError):
        make_cutoff(0.0, g)
    with pytest.raises(ValueError):
        make_cutoff(6.0, g)
    with pytest.raises(ValueError):
        from csslab.virial import virial_truncated

        virial_truncated(soliton_profile(1, build_grid(10.0, 128)), make_cutoff(2.0, g))


def test_virial_warns_when_not_decayed():
    g = build_grid(10.0, 256)
    with pytest.warns(UserWarning, match="virial integrand"):
        virial(soliton_profile(0, g))


@pytest.mark.parametrize("m", [0, 1])
def test_face_and_nodal_rates_agree(m, grid_medium):
    f = field_from_function(gaussian_packet(m, 0.3), grid_medium, m)
    assert virial_rate(f) == pytest.approx(virial_rate_nodal(f), rel=1e-4)
    # for u = r^m e^{-r^2/2 + i k r^2} the rate is 8 k int r^2 |u|^2 dx
    assert virial_rate(f) == pytest.approx(8 * 0.3 * virial(f), rel=1e-4)


def test_rate_matches_time_difference_and_acceleration_matches_energy():
    g = build_grid(20.0, 2048)
    f = field_from_function(gaussian_packet(1, 0.1), g, 1)
    traj = evolve(f, SimConfig(dt=1e-3, t_end=0.1), probes=virial_probes())
    rep = virial_accel_check(traj)
    assert rep.rate_gap < 1e-5
    assert rep.accel_rel_error < 1e-3
    assert set(rep.as_columns()) == {"t", "V_dd", "16E", "dV_fd", "rate"}


def test_accel_check_requires_probes():
    g = build_grid(10.0, 256)
    traj = evolve(field_from_function(gaussian_packet(0), g, 0), SimConfig(dt=1e-2, t_end=0.05))
    with pytest.raises(ValueError):
        virial_accel_check(traj)


def test_cauchy_schwarz_gap_nonnegative_on_random_fields():
    g = build_grid(50.0, 2048)
    rng = np.random.default_rng(11)
    for k, R in enumerate((5.0, 10.0, 20.0) * 4):
        f = random_profile(rng, g, k % 3)
        assert cauchy_schwarz_gap(f, make_cutoff(R, g)) >= 0


def test_rate_bound_along_trajectory():
    g = build_grid(20.0, 1024)
    f = field_from_function(gaussian_packet(1, 0.2), g, 1)
    cut = make_cutoff(5.0, g)
    traj = evolve(f, SimConfig(dt=1e-2, t_end=0.2), probes=virial_probes(cut))
    assert rate_bound(traj, cut) >= 0
    assert {"charge_outside_over_R2", "gradient_outside", "l4_outside"} <= set(traj.probes)


@pytest.mark.parametrize("t", [0.25, -0.25])
def test_conformal_cooperation(t):
    g = build_grid(20.0, 4096)
    f = field_from_function(gaussian_packet(1), g, 1)
    res = conformal_cooperation(f, t, dt=1e-3)
    assert res.rel_gap < 1e-3
    with pytest.raises(ValueError):
        conformal_cooperation(f, 0.0)
