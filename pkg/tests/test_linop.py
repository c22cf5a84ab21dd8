from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csslab.grid import EquivariantField, build_grid, inner
from csslab.linop import (
    RealPairField,
    assemble_matrix,
    b_adj,
    b_op,
    bogomolnyi_faces,
    coercivity_ratio,
    curly_l,
    expansion_slope,
    expansion_terms,
    face_norm_sq,
    kernel_residuals,
    l_q,
    l_q_adj,
    lambda_gen,
    linearize,
    n_q,
    orthogonality,
    pair_face_weights,
    pair_weights,
    weighted_asymmetry,
)
from csslab.soliton import soliton_lambda_q, soliton_profile


@pytest.fixture(scope="module")
def lin1():
    return linearize(1, build_grid(30.0, 512))


def bump(grid, m, c=1.0 + 0.5j):
    return EquivariantField(grid, m, c * grid.r**m * np.exp(-((grid.r - 2) ** 2)))


def test_linearize_rejects_coarse_grid():
    with pytest.raises(ValueError, match="coarse"):
        linearize(1, build_grid(30.0, 16))


def test_b_adjoint_is_weighted_transpose(grid_medium):
    rng = np.random.default_rng(4)
    f = bump(grid_medium, 1)
    g = EquivariantField(grid_medium, 1, rng.normal(size=grid_medium.n) + 1j * rng.normal(size=grid_medium.n))
    h = EquivariantField(grid_medium, 1, rng.normal(size=grid_medium.n).astype(complex))
    assert inner(b_op(f, g), h) == pytest.approx(inner(g, b_adj(f, h)), rel=1e-12)


def test_lambda_generator_on_soliton(grid_fine):
    q = soliton_profile(1, grid_fine)
    lq = lambda_gen(q)
    sel = grid_fine.r < 10
    np.testing.assert_allclose(lq.u.real[sel], soliton_lambda_q(grid_fine.r, 1)[sel], atol=1e-4)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.5, 3.0))
def test_polarization_identity_exact(a, b, centre):
    # D_+(Q + eps) - D_+ Q = L_Q eps + N_Q[eps] to round-off
    g = build_grid(20.0, 256)
    lin = linearize(1, g)
    eps = (a + 1j * b) * g.r * np.exp(-((g.r - centre) ** 2))
    lhs = bogomolnyi_faces(lin.q + eps, g, 1) - bogomolnyi_faces(lin.q.astype(complex), g, 1)
    rhs = l_q(lin, eps).values + n_q(lin, eps).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * max(1.0, np.max(np.abs(lhs))))


def test_adjoint_matrix_free_matches_dense(lin1):
    g = lin1.grid
    rng = np.random.default_rng(5)
    x = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    y = rng.normal(size=g.n - 1) + 1j * rng.normal(size=g.n - 1)
    M = assemble_matrix("L_Q", lin1)
    stacked = M @ np.concatenate([x.real, x.imag])
    np.testing.assert_allclose(stacked, np.concatenate([l_q(lin1, x).values.real, l_q(lin1, x).values.imag]), atol=1e-10)
    # <L x, y>_faces = <x, L^* y>_nodes
    lhs = 2 * np.pi * np.sum(pair_face_weights(g) * stacked * np.concatenate([y.real, y.imag]))
    adj = l_q_adj(lin1, y).u
    rhs = 2 * np.pi * np.sum(pair_weights(g) * np.concatenate([x.real, x.imag]) * np.concatenate([adj.real, adj.imag]))
    assert lhs == pytest.approx(rhs, rel=1e-11)


def test_curly_l_identity_and_symmetry(lin1):
    C = assemble_matrix("curly_L", lin1)
    adj = assemble_matrix("L_Q_adj", lin1)
    M = assemble_matrix("L_Q", lin1)
    np.testing.assert_allclose(C, adj @ M)
    assert weighted_asymmetry(C, lin1.grid) < 1e-12
    x = bump(lin1.grid, 1)
    out = curly_l(lin1, RealPairField.from_field(x))
    assert isinstance(out, RealPairField)
    stacked = RealPairField.from_field(x).stacked()
    np.testing.assert_allclose(C @ stacked, out.stacked(), atol=1e-10 * np.max(np.abs(out.stacked())))
    with pytest.raises(ValueError):
        assemble_matrix("bogus", lin1)


@pytest.mark.parametrize("m", [0, 1])
def test_kernel_modes(m):
    res = kernel_residuals(linearize(m, build_grid(30.0, 1024)))
    assert res["iQ"] < 1e-3 and res["LambdaQ"] < 1e-3


@pytest.mark.parametrize("m, floor", [(1, 0.5), (0, 0.2)])
def test_coercivity_positive_and_kernel_visible(m, floor):
    res = coercivity_ratio(linearize(m, build_grid(30.0, 256)))
    assert res.ratio > floor
    assert res.unconstrained_ratio < 0.2 * res.ratio
    assert np.all(np.diff(res.rayleigh) >= -1e-10)


@pytest.mark.parametrize("m", [0, 1])
def test_energy_expansion_is_exact_in_polarized_form(m):
    g = build_grid(40.0, 4096)
    lin = linearize(m, g)
    eps = bump(g, m)
    t = expansion_terms(lin, eps)
    assert t.two_energy_relative == pytest.approx(t.ln_sq, rel=1e-11)
    slope, gaps = expansion_slope(lin, eps, relative=True)
    assert slope == pytest.approx(3.0, abs=0.1)


def test_orthogonality_of_kernel_directions(lin1):
    g = lin1.grid
    e = EquivariantField(g, 1, 1j * soliton_lambda_q(g.r, 1))
    a, b = orthogonality(lin1, e)
    # (Lambda Q, Q) vanishes because scaling preserves the charge
    assert a == 0.0 and abs(b) < 1e-3 * inner(lin1.q_field, lin1.q_field)
    assert face_norm_sq(g, np.ones(g.n - 1)) == pytest.approx(np.pi * g.r_max**2, rel=1e-2)
