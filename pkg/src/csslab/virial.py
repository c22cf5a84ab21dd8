"""Virial diagnostics: smooth cutoffs of ``|x|^2``, virial rates and the identities around them.

The virial rate is evaluated on the cell faces, with the same flux pairing as
the discrete Laplacian.  That makes it the exact time derivative of the
discrete virial under the semi-discrete flow, so finite differences of a
computed series match it up to time-stepping error alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .evolve import SimConfig, Trajectory, evolve
from .gauge import bogomolnyi_array, energy, potentials
from .grid import TWO_PI, EquivariantField, RadialGrid, boundary_fraction, integrate, radial_derivative

CUTOFF_CONSTANT_MAX = 36.0


def _blend(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """C^2 quintic ``p(s) = (1-s)^3 (13 s^2 + 5 s + 1)`` and its derivative.

    ``p(0) = 1, p'(0) = 2, p''(0) = 2`` continue ``r^2/R^2`` at ``s = 0``
    and ``p, p', p''`` vanish at ``s = 1``.
    """
    p = (1 - s) ** 3 * (13 * s**2 + 5 * s + 1)
    dp = -3 * (1 - s) ** 2 * (13 * s**2 + 5 * s + 1) + (1 - s) ** 3 * (26 * s + 5)
    return p, dp


def cutoff_profile(r: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    """``chi_R(r)`` and ``d_r chi_R(r)``: ``r^2`` below ``R``, quintic blend to 0 at ``2R``."""
    r = np.asarray(r, dtype=float)
    if not np.isfinite(R):
        return r**2, 2 * r
    s = np.clip((r - R) / R, 0.0, 1.0)
    p, dp = _blend(s)
    inner = r < R
    chi = np.where(inner, r**2, R * R * p)
    dchi = np.where(inner, 2 * r, R * dp)
    return chi, dchi


def cutoff_constant(R: float = 1.0, samples: int = 200001) -> float:
    """``max |chi'|^2 / chi`` over a fine sample of ``[0, 2R)``; independent of ``R``."""
    r = np.linspace(0.0, 2 * R, samples)[1:-1]
    chi, dchi = cutoff_profile(r, R)
    return float(np.max(dchi**2 / chi))


@dataclass(frozen=True, eq=False)
class Cutoff:
    R: float
    chi: np.ndarray = field(repr=False)
    dchi: np.ndarray = field(repr=False)
    constant: float
    grid: RadialGrid = field(repr=False)


def make_cutoff(R: float, grid: RadialGrid) -> Cutoff:
    """Smooth truncation of ``r^2`` at scale ``R``; checks ``|chi'|^2 <= C chi`` on construction."""
    if not R > 0:
        raise ValueError(f"cutoff radius must be positive, got {R}")
    if 2 * R > grid.r_max:
        raise ValueError(f"cutoff support 2R={2 * R} exceeds r_max={grid.r_max}")
    chi, dchi = cutoff_profile(grid.r, R)
    const = cutoff_constant()
    pos = chi > 0
    nodal = float(np.max(dchi[pos] ** 2 / chi[pos]))
    if nodal > const * (1 + 1e-9) or const > CUTOFF_CONSTANT_MAX:
        raise ValueError(f"cutoff violates |chi'|^2 <= C chi (nodal {nodal}, sampled {const})")
    if np.any(dchi[~pos] != 0):
        raise ValueError("cutoff slope does not vanish where chi does")
    return Cutoff(float(R), chi, dchi, const, grid)


def quadratic_weight(grid: RadialGrid) -> Cutoff:
    """The untruncated weight ``chi = r^2`` packaged as a cutoff with ``R = inf``."""
    return Cutoff(np.inf, grid.r**2, 2 * grid.r, 4.0, grid)


def _check_grid(f: EquivariantField, c: Cutoff) -> None:
    if not f.grid.same_as(c.grid):
        raise ValueError("cutoff and field live on different grids")


def virial(f: EquivariantField, tail_tol: float = 1e-6) -> float:
    """``int |x|^2 |phi|^2 dx``; warns if the outermost cells carry a visible share."""
    dens = f.grid.r**2 * np.abs(f.u) ** 2
    total = integrate(f.grid, dens)
    edge = TWO_PI * float(np.dot(f.grid.w[-8:], dens[-8:]))
    if total > 0 and edge > tail_tol * total:
        warnings.warn(f"virial integrand not decayed at r_max={f.grid.r_max} ({edge / total:.2e})", stacklevel=2)
    return total


def virial_truncated(f: EquivariantField, cutoff: Cutoff) -> float:
    _check_grid(f, cutoff)
    return integrate(f.grid, cutoff.chi * np.abs(f.u) ** 2)


def virial_rate(f: EquivariantField, cutoff: Cutoff | None = None) -> float:
    """``2 int d_r chi Im(conj(phi) d_r phi) dx`` in the face form.

    ``4 pi sum_j r_{j+1/2} h [(chi_{j+1}-chi_j)/h] Im(conj(u_j) u_{j+1})/h``,
    which is the second-order face quadrature of the continuum integral.
    """
    grid = f.grid
    c = cutoff if cutoff is not None else quadratic_weight(grid)
    _check_grid(f, c)
    h = grid.h
    u = f.u
    dchi = np.diff(c.chi) / h
    cross = np.imag(np.conj(u[:-1]) * u[1:]) / h
    return float(2 * TWO_PI * h * np.dot(grid.faces, dchi * cross))


def virial_rate_nodal(f: EquivariantField, cutoff: Cutoff | None = None) -> float:
    """Same rate with node-centred ``d_r`` and the analytic ``chi'``; used as a cross-check."""
    grid = f.grid
    c = cutoff if cutoff is not None else quadratic_weight(grid)
    du = radial_derivative(f.u, grid, f.m)
    return 2 * integrate(grid, c.dchi * np.imag(np.conj(f.u) * du))


def remainder_terms(f: EquivariantField, R: float) -> dict[str, float]:
    """Ingredients of the truncation remainder: charge/R^2, gradient and L^4 mass beyond ``R``."""
    grid = f.grid
    outside = grid.r >= R
    du = radial_derivative(f.u, grid, f.m)
    grad = np.abs(du) ** 2 + (f.m / grid.r) ** 2 * np.abs(f.u) ** 2
    return {
        "charge_outside_over_R2": integrate(grid, outside * np.abs(f.u) ** 2) / R**2,
        "gradient_outside": integrate(grid, outside * grad),
        "l4_outside": integrate(grid, outside * np.abs(f.u) ** 4),
    }


def virial_probes(cutoff: Cutoff | None = None) -> dict:
    """Probes for :func:`csslab.evolve.evolve` recording ``V`` and its rate each step."""
    if cutoff is None:
        return {
            "V": lambda f: integrate(f.grid, f.grid.r**2 * np.abs(f.u) ** 2),
            "rate": lambda f: virial_rate(f),
        }
    probes = {
        "V": lambda f: virial_truncated(f, cutoff),
        "rate": lambda f: virial_rate(f, cutoff),
    }
    for key in ("charge_outside_over_R2", "gradient_outside", "l4_outside"):
        probes[key] = lambda f, key=key: remainder_terms(f, cutoff.R)[key]
    return probes


@dataclass(frozen=True)
class VirialReport:
    times: np.ndarray
    accel_fd: np.ndarray
    sixteen_e: np.ndarray
    rate_fd: np.ndarray
    rate: np.ndarray
    accel_rel_error: float
    rate_gap: float
    remainder: dict[str, float]

    def as_columns(self) -> dict[str, np.ndarray]:
        return {"t": self.times, "V_dd": self.accel_fd, "16E": self.sixteen_e, "dV_fd": self.rate_fd, "rate": self.rate}


def virial_accel_check(traj: Trajectory, t_window: tuple[float, float] | None = None) -> VirialReport:
    """Compare the second difference of ``V`` with ``16 E`` and the first difference with the rate.

    Needs a trajectory run with :func:`virial_probes`.  Relative errors are
    taken against ``max |16 E|`` (resp. ``max |rate|``) over the window, so a
    zero-energy run reports an absolute deviation scaled by its kinetic energy.
    """
    if "V" not in traj.probes or "rate" not in traj.probes:
        raise ValueError("trajectory lacks virial probes; run evolve with virial_probes()")
    t = traj.times
    if len(t) < 3:
        raise ValueError("need at least three samples for a second difference")
    V = traj.probes["V"]
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
        raise ValueError("virial check requires a uniform time series")
    dt = dt[0]
    mid = t[1:-1]
    accel = (V[2:] - 2 * V[1:-1] + V[:-2]) / dt**2
    rate_fd = (V[2:] - V[:-2]) / (2 * dt)
    rate = traj.probes["rate"][1:-1]
    s16 = 16 * traj.energy[1:-1]
    sel = np.ones_like(mid, dtype=bool)
    if t_window is not None:
        sel = (mid >= t_window[0] - 1e-12) & (mid <= t_window[1] + 1e-12)
        if not np.any(sel):
            raise ValueError("no samples inside the requested window")
    kinetic = float(traj.h1m[0])
    scale_e = float(np.max(np.abs(s16[sel])))
    if scale_e < 1e-8 * kinetic:
        scale_e = 8 * kinetic
    accel_err = float(np.max(np.abs(accel[sel] - s16[sel])) / scale_e)
    scale_r = float(np.max(np.abs(rate[sel])))
    if scale_r < 1e-8 * kinetic:
        scale_r = kinetic
    rate_gap = float(np.max(np.abs(rate_fd[sel] - rate[sel])) / scale_r)
    rem = {k: float(np.max(v)) for k, v in traj.probes.items() if k not in ("V", "rate")}
    return VirialReport(mid[sel], accel[sel], s16[sel], rate_fd[sel], rate[sel], accel_err, rate_gap, rem)


def cauchy_schwarz_gap(f: EquivariantField, cutoff: Cutoff) -> float:
    """``sqrt(2 E[f] int |f|^2 |chi'|^2) - |int chi' Im(conj(f) d_r f)|`` at ``g = 1``.

    ``E`` is the self-dual energy ``1/2 ||D_+ f||^2``.
    """
    _check_grid(f, cutoff)
    grid = f.grid
    p = potentials(f)
    e = 0.5 * integrate(grid, np.abs(bogomolnyi_array(f.u, p.a_theta, grid, f.m)) ** 2)
    du = radial_derivative(f.u, grid, f.m)
    lhs = abs(integrate(grid, cutoff.dchi * np.imag(np.conj(f.u) * du)))
    rhs = np.sqrt(max(2 * e * integrate(grid, np.abs(f.u) ** 2 * cutoff.dchi**2), 0.0))
    return float(rhs - lhs)


def rate_bound(traj: Trajectory, cutoff: Cutoff) -> float:
    """Worst slack of ``|dV/dt| <= 2 sqrt(2 E C) V^{1/2}`` along a virial-probed trajectory."""
    V = traj.probes["V"]
    rate = traj.probes["rate"]
    bound = 2 * np.sqrt(np.maximum(2 * traj.energy * cutoff.constant, 0.0) * np.maximum(V, 0.0))
    return float(np.min(bound - np.abs(rate)))


@dataclass(frozen=True)
class CooperationResult:
    t: float
    lhs: float
    rhs: float

    @property
    def rel_gap(self) -> float:
        return abs(self.lhs - self.rhs) / max(abs(self.rhs), 1e-300)


def chirp(f: EquivariantField, t: float) -> EquivariantField:
    """``e^{i r^2/(4t)} f``."""
    return f.with_values(np.exp(1j * f.grid.r**2 / (4.0 * t)) * f.u)


def conformal_cooperation(
    f0: EquivariantField,
    t: float,
    dt: float = 1e-3,
    scheme: str = "strang",
    g: float = 1.0,
) -> CooperationResult:
    """``8 t^2 E[e^{i r^2/4t} phi_0]`` against the virial of the evolved solution at ``t``.

    ``t`` may be negative (backward evolution).
    """
    if t == 0:
        raise ValueError("cooperation identity needs t != 0")
    if boundary_fraction(f0) > 1e-10:
        warnings.warn("initial data not localized inside r_max", stacklevel=2)
    lhs = 8 * t * t * energy(chirp(f0, t), None, g)
    traj = evolve(f0, SimConfig(dt=dt, t_end=t, scheme=scheme, g=g))
    rhs = virial(traj.final.field)
    return CooperationResult(float(t), float(lhs), float(rhs))

