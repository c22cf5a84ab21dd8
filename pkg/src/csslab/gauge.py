"""Coulomb-gauge potentials, the Bogomol'nyi operator, the nonlinearity and energies.

``A_theta`` is a cumulative charge integral from the axis and ``A_0`` is the
backward tail integral vanishing at ``r_max``.  The two quadratures are exact
weighted transposes of each other (see :func:`csslab.grid.tail`), which makes
the discrete evolution the Hamiltonian flow of :func:`energy`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    EquivariantField,
    RadialGrid,
    charge,
    cumulative,
    gradient_sq,
    integrate,
    l4_norm_4,
    radial_derivative,
    tail,
)


@dataclass(frozen=True, eq=False)
class GaugePotentials:
    a_theta: np.ndarray = field(repr=False)
    a_zero: np.ndarray = field(repr=False)
    charge: float


def a_theta_array(u: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    return -0.5 * cumulative(grid, m, np.abs(u) ** 2)


def a_zero_array(u: np.ndarray, at: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    return -tail(grid, m, (m + at) * np.abs(u) ** 2 / grid.r)


def a_theta(f: EquivariantField) -> np.ndarray:
    """``A_theta(r) = -1/2 int_0^r |u|^2 s ds``."""
    return a_theta_array(f.u, f.grid, f.m)


def a_zero(f: EquivariantField, a_th: np.ndarray, tail_tol: float = 1e-8) -> np.ndarray:
    """``A_0(r) = -int_r^inf (m + A_theta)|u|^2 ds/s``, zero at ``r_max``.

    Warns when the outermost sample carries enough density that truncating
    the integral at ``r_max`` is visible.
    """
    a_th = np.asarray(a_th, dtype=float)
    if a_th.shape != f.u.shape:
        raise ValueError(f"A_theta has shape {a_th.shape}, field has {f.u.shape}")
    grid = f.grid
    q = charge(f)
    edge = abs(f.u[-1]) ** 2 * grid.r[-1]
    if q > 0 and edge > tail_tol * q:
        warnings.warn(
            f"A_0 tail truncated at r_max={grid.r_max}: |u(r_n)|^2 r_n = {edge:.3e}", stacklevel=2
        )
    return a_zero_array(f.u, a_th, grid, f.m)


def potentials(f: EquivariantField) -> GaugePotentials:
    at = a_theta(f)
    return GaugePotentials(at, a_zero(f, at), charge(f))


def _check(f: EquivariantField, p: GaugePotentials | None) -> GaugePotentials:
    if p is None:
        return potentials(f)
    if p.a_theta.shape != f.u.shape:
        raise ValueError("potentials do not match the field's grid")
    return p


def bogomolnyi_array(u: np.ndarray, at: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    return radial_derivative(u, grid, m) - (m + at) / grid.r * u


def bogomolnyi(f: EquivariantField, p: GaugePotentials | None = None) -> EquivariantField:
    """``D_+ u = d_r u - (m + A_theta)/r u``."""
    p = _check(f, p)
    return f.with_values(bogomolnyi_array(f.u, p.a_theta, f.grid, f.m))


def covariant_grad_sq(f: EquivariantField, p: GaugePotentials | None = None) -> float:
    """``||D_x u||^2 = ||d_r u||^2 + ||(m + A_theta)/r u||^2``."""
    p = _check(f, p)
    grid = f.grid
    angular = integrate(grid, ((f.m + p.a_theta) / grid.r) ** 2 * np.abs(f.u) ** 2)
    return gradient_sq(f) + angular


def potential_array(u: np.ndarray, at: np.ndarray, a0: np.ndarray, grid: RadialGrid, m: int, g: float) -> np.ndarray:
    """Real multiplier ``V`` with ``F(u) = V u``.

    The cross term is ``2 m A_theta / r^2``: expanding ``(m + A_theta)^2 / r^2``
    and moving ``m^2/r^2`` into ``Delta_m`` leaves exactly this.
    """
    r = grid.r
    return (2 * m * at + at**2) / r**2 + a0 - g * np.abs(u) ** 2


def nonlinearity(f: EquivariantField, p: GaugePotentials | None, g: float) -> EquivariantField:
    p = _check(f, p)
    v = potential_array(f.u, p.a_theta, p.a_zero, f.grid, f.m, g)
    return f.with_values(v * f.u)


def energy(f: EquivariantField, p: GaugePotentials | None = None, g: float = 1.0) -> float:
    """``1/2 ||D_x u||^2 - g/4 ||u||_4^4``; conserved by the discrete flow."""
    p = _check(f, p)
    return 0.5 * covariant_grad_sq(f, p) - 0.25 * g * l4_norm_4(f)


def energy_bogomolnyi(f: EquivariantField, p: GaugePotentials | None = None, g: float = 1.0) -> float:
    """``1/2 ||D_+ u||^2 + (1-g)/4 ||u||_4^4``.

    Agrees with :func:`energy` up to discretization error; at ``g = 1`` it is a
    perfect square, so it stays accurate for near-zero energies.
    """
    p = _check(f, p)
    dp = bogomolnyi_array(f.u, p.a_theta, f.grid, f.m)
    return 0.5 * integrate(f.grid, np.abs(dp) ** 2) + 0.25 * (1.0 - g) * l4_norm_4(f)
