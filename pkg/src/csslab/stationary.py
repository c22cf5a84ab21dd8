"""Stationary states.

* The self-dual reduction: with ``rho = r^m e^{w/2}`` the zero-energy
  equation becomes the Liouville-type ODE ``w'' + w'/r + r^{2m} e^w = 0``,
  ``w'(0) = 0``, integrated from a series start at the axis.
* ``g > 1``: the nonlocal elliptic problem
  ``Delta_m u - omega u - V[u] u = 0`` with ``V`` the gauge multiplier of
  :func:`csslab.gauge.potential_array`.  The solver freezes the potentials,
  shoots the discrete radial recurrence on the amplitude at the axis, updates
  the potentials and repeats; a Newton polish on the full discrete system
  finishes the job.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .gauge import a_theta_array, a_zero_array, energy, energy_bogomolnyi, potential_array, potentials
from .grid import (
    EquivariantField,
    RadialGrid,
    apply_laplacian,
    build_grid,
    charge,
    cumulative,
    integrate,
    laplacian_bands,
    tail,
)
from .soliton import soliton_charge

MINIMALITY_FLAG = "minimality-unverified"
SHOOTING_FLOOR_FLAG = "picard-stopped-at-shooting-floor"


class SolverError(RuntimeError):
    """A stationary solver failed (no bracket, stagnation, step-size collapse)."""


# --- self-dual ODE -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OdeSolution:
    """Solution of ``w'' + w'/r + r^{2m} e^w = 0`` with ``w(0) = w0``, ``w'(0) = 0``."""

    m: int
    w0: float
    r: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    dw: np.ndarray = field(repr=False)
    r_start: float
    dense: object = field(repr=False)

    def _series(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = 2 * self.m + 2
        c = np.exp(self.w0) / k**2
        return self.w0 - c * r**k, -k * c * r ** (k - 1)

    def w_at(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r > self.r[-1] * (1 + 1e-12)):
            raise ValueError(f"requested radius beyond integration range {self.r[-1]}")
        out = np.empty_like(r)
        near = r < self.r_start
        out[near] = self._series(r[near])[0]
        out[~near] = self.dense(r[~near])[0]
        return out

    def rho(self, r: np.ndarray) -> np.ndarray:
        """Reconstructed profile ``r^m e^{w/2}``."""
        r = np.asarray(r, dtype=float)
        return r**self.m * np.exp(0.5 * self.w_at(r))

    def charge(self) -> float:
        """``2 pi int_0^R rho^2 r dr = -2 pi R w'(R)`` at the end of the range.

        The identity follows from integrating the ODE once; the remaining
        tail beyond ``R`` is ``O(R^{-(2m+2)})``.
        """
        return float(-2.0 * np.pi * self.r[-1] * self.dw[-1])

    def on_grid(self, grid: RadialGrid) -> EquivariantField:
        return EquivariantField(grid, self.m, self.rho(grid.r).astype(complex), lambda r: self.rho(r).astype(complex))


def selfdual_w0(m: int) -> float:
    """Axis value ``log(8 (m+1)^2)`` that reproduces the unit-scale soliton."""
    return float(np.log(8.0 * (m + 1) ** 2))


def selfdual_ode_solve(m: int, w0: float, r_max: float = 20.0, rtol: float = 1e-12, atol: float = 1e-14) -> OdeSolution:
    """Integrate the self-dual ODE with an embedded 8(5,3) Runge-Kutta pair.

    The start radius is chosen so that the neglected ``O(r^{4m+4})`` series
    term is below ``atol``.
    """
    if m < 0 or int(m) != m:
        raise ValueError(f"m must be a non-negative integer, got {m}")
    if not np.isfinite(w0):
        raise ValueError("w0 must be finite")
    k = 2 * m + 2
    # the first neglected term is ~ (e^{w0} r^k / k^2)^2 / 2
    r0 = min(1e-2, (np.sqrt(2 * atol) * k**2 / np.exp(w0)) ** (1.0 / k))
    c = np.exp(w0) / k**2
    y0 = [w0 - c * r0**k, -k * c * r0 ** (k - 1)]

    def rhs(r, y):
        return [y[1], -y[1] / r - r ** (2 * m) * np.exp(y[0])]

    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=True)
    if sol.status != 0:
        raise SolverError(f"self-dual ODE integration failed: {sol.message}")
    return OdeSolution(int(m), float(w0), sol.t, sol.y[0], sol.y[1], float(r0), sol.sol)


# --- g > 1 ground states ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    m: int
    g: float
    omega: float
    profile: EquivariantField = field(repr=False)
    charge: float
    energy: float
    energy_bogomolnyi: float
    residual: float
    alpha: float
    picard_passes: int
    newton_steps: int
    brackets: tuple[float, ...]
    flags: tuple[str, ...] = (MINIMALITY_FLAG,)


def _frozen_multiplier(u: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    """Gauge part of ``V`` (everything except ``-g u^2``)."""
    at = a_theta_array(u, grid, m)
    a0 = a_zero_array(u, at, grid, m)
    return (2 * m * at + at**2) / grid.r**2 + a0


def _shoot(a: float, ab: np.ndarray, coef: np.ndarray, g: float, start: float) -> tuple[int, np.ndarray, int]:
    """March the discrete stationary recurrence from ``u_1 = a * start``.

    Returns ``(+1 | -1 | 0, u, stop)``: ``+1`` when the profile turns back up
    after having decreased or never decreases (amplitude too small), ``-1``
    when it crosses zero (too large), ``0`` when it reaches the wall.
    ``stop`` is the last trustworthy index.
    """
    n = coef.size
    up, main, lo = ab[0], ab[1], ab[2]
    u = np.zeros(n)
    u[0] = a * start
    prev = 0.0
    falling = False
    for j in range(n - 1):
        uj = u[j]
        nxt = -((main[j] - coef[j] + g * uj * uj) * uj + (lo[j - 1] * prev if j else 0.0)) / up[j + 1]
        if nxt <= 0.0:
            return -1, u, j
        if nxt < uj:
            falling = True
        elif falling:
            return 1, u, j
        if nxt > 1e8:
            return 1, u, j
        prev = uj
        u[j + 1] = nxt
    return (0 if falling else 1), u, n - 1


def _classify(a, ab, coef, g, start):
    return _shoot(a, ab, coef, g, start)[0]


def _brackets(ab, coef, g, start, lo=1e-4, hi=1e4, samples=97) -> list[tuple[float, float]]:
    grid_a = np.geomspace(lo, hi, samples)
    cls = [_classify(a, ab, coef, g, start) for a in grid_a]
    out = []
    for k in range(samples - 1):
        if cls[k] == 0:
            out.append((grid_a[k], grid_a[k]))
        elif cls[k] == 1 and cls[k + 1] == -1:
            out.append((grid_a[k], grid_a[k + 1]))
    return out


def _bisect(ab, coef, g, start, a_lo, a_hi, r) -> np.ndarray:
    """Bisect in ``log a`` to round-off and return the bracketed decaying profile.

    The exponentially growing mode eventually takes over in floating point;
    the profile is kept up to its minimum before the turn and continued by
    the free decaying asymptotics beyond.
    """
    if a_lo != a_hi:
        for _ in range(200):
            mid = np.sqrt(a_lo * a_hi)
            if mid in (a_lo, a_hi):
                break
            c = _classify(mid, ab, coef, g, start)
            if c == 0:
                a_lo = a_hi = mid
                break
            if c == 1:
                a_lo = mid
            else:
                a_hi = mid
    _, u, stop = _shoot(a_lo, ab, coef, g, start)
    u = u.copy()
    k = int(np.argmin(u[: stop + 1] + np.where(np.arange(stop + 1) < np.argmax(u[: stop + 1]), np.inf, 0.0)))
    if k < u.size - 1:
        # continue with the decaying free asymptotics r^{-1/2} e^{-sqrt(omega) r}
        kappa = np.sqrt(max(coef[k], 0.0))
        rk, rr = r[k], r[k + 1 :]
        u[k + 1 :] = u[k] * np.sqrt(rk / rr) * np.exp(-kappa * (rr - rk))
    return u


def _at_shooting_floor(history: list[float], norm: float, window: int = 20, floor: float = 1e-6) -> bool:
    """True once the pass-to-pass change is small and has stopped decreasing.

    Bisection pins the axis amplitude to round-off, so the shot profile is
    only trustworthy down to roughly ``sqrt(eps)`` of its peak; the change
    between passes then cycles at that level instead of shrinking.
    """
    if len(history) < 2 * window or history[-1] > floor * norm:
        return False
    return min(history[-window:]) >= 0.5 * min(history[-2 * window : -window])


def _residual(u, grid, m, g, omega) -> np.ndarray:
    at = a_theta_array(u, grid, m)
    v = potential_array(u, at, a_zero_array(u, at, grid, m), grid, m, g)
    return apply_laplacian(u, grid, m) - omega * u - v * u


def _jacobian(u, grid, m, g, omega) -> np.ndarray:
    """Dense Jacobian of the real residual ``Delta_m u - omega u - V[u] u``."""
    r = grid.r
    n = grid.n
    at = a_theta_array(u, grid, m)
    a0 = a_zero_array(u, at, grid, m)
    v = potential_array(u, at, a0, grid, m, g)
    d_at = -cumulative(grid, m, np.diag(u))
    d_a0 = -tail(grid, m, (u**2 / r)[:, None] * d_at + np.diag(2.0 * (m + at) * u / r))
    d_v = ((2 * m + 2 * at) / r**2)[:, None] * d_at + d_a0 - np.diag(2.0 * g * u)
    ab = laplacian_bands(grid, m)
    jac = -u[:, None] * d_v
    idx = np.arange(n)
    jac[idx, idx] += ab[1] - omega - v
    jac[idx[:-1], idx[1:]] += ab[0, 1:]
    jac[idx[1:], idx[:-1]] += ab[2, :-1]
    return jac


def groundstate_g(
    m: int,
    g: float,
    omega: float = 1.0,
    grid: RadialGrid | None = None,
    picard_tol: float = 1e-8,
    picard_max: int = 200,
    damping: float = 0.5,
    newton_tol: float = 1e-10,
    newton_max: int = 30,
) -> GroundStateResult:
    """Positive decaying solution of ``Delta_m u - omega u - V[u] u = 0`` for ``g > 1``.

    Outer passes freeze ``A_theta, A_0`` at the current profile and shoot the
    discrete recurrence on ``u ~ a r^m`` (bisection between profiles that turn
    back up and profiles that cross zero).  Passes are damped and stop when
    the profile moves by less than ``picard_tol`` in L^2; a Newton polish on
    the full nonlocal discrete system then drives the residual to round-off.

    Raises
    ------
    SolverError
        No bracket in ``a in [1e-4, 1e4]``, stagnation after ``picard_max``
        passes, or Newton failure.
    """
    if not g > 1:
        raise ValueError(f"g must exceed 1, got {g}")
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if grid is None:
        grid = build_grid(30.0 / np.sqrt(omega), 2048)
    ab = laplacian_bands(grid, m)
    start = grid.r[0] ** m
    coef = np.full(grid.n, float(omega))
    brackets = _brackets(ab, coef, g, start)
    if not brackets:
        raise SolverError("no shooting bracket in a in [1e-4, 1e4] for the local problem")
    u = _bisect(ab, coef, g, start, *brackets[0], grid.r)
    passes = 0
    change = np.inf
    history: list[float] = []
    flags = [MINIMALITY_FLAG]
    for passes in range(1, picard_max + 1):
        coef = omega + _frozen_multiplier(u, grid, m)
        found = _brackets(ab, coef, g, start)
        if not found:
            raise SolverError(f"no shooting bracket at pass {passes}")
        brackets = found
        new = _bisect(ab, coef, g, start, *found[0], grid.r)
        change = np.sqrt(integrate(grid, (new - u) ** 2))
        u = (1 - damping) * u + damping * new
        history.append(change)
        if change < picard_tol:
            break
        if _at_shooting_floor(history, np.sqrt(integrate(grid, u**2))):
            # double-precision shooting cannot resolve the tail further; Newton takes over
            flags.append(SHOOTING_FLOOR_FLAG)
            break
    else:
        raise SolverError(f"outer potential iteration stagnated after {picard_max} passes (change {change:.3e})")

    u, steps = _newton(u, grid, m, g, omega, newton_tol, newton_max)
    mids = tuple(float(np.sqrt(b[0] * b[1])) for b in brackets)
    return _result(m, g, omega, grid, u, passes, steps, mids, tuple(flags))


def _newton(u, grid, m, g, omega, tol, max_steps) -> tuple[np.ndarray, int]:
    """Newton with step halving on the discrete residual; stops at ``tol * ||Delta_m u||``."""

    def norm(v):
        return np.sqrt(integrate(grid, v**2))

    scale = norm(apply_laplacian(u, grid, m))
    res = _residual(u, grid, m, g, omega)
    for steps in range(max_steps + 1):
        if norm(res) < tol * scale:
            return u, steps
        if steps == max_steps:
            break
        du = np.linalg.solve(_jacobian(u, grid, m, g, omega), res)
        step = 1.0
        while True:
            trial = u - step * du
            trial_res = _residual(trial, grid, m, g, omega)
            if norm(trial_res) < norm(res) or step < 1e-3:
                break
            step *= 0.5
        u, res = trial, trial_res
    raise SolverError(f"Newton did not converge (residual {norm(res) / scale:.3e})")


def continue_groundstate(
    result: GroundStateResult,
    g: float,
    newton_tol: float = 1e-10,
    newton_max: int = 40,
) -> GroundStateResult:
    """Solve at a new coupling by Newton from a converged neighbouring state.

    Used to follow the branch toward ``g -> 1+``, where the state concentrates
    and the potential iteration of :func:`groundstate_g` stops contracting.
    """
    if not g > 1:
        raise ValueError(f"g must exceed 1, got {g}")
    grid, m = result.profile.grid, result.m
    u, steps = _newton(result.profile.u.real.copy(), grid, m, g, result.omega, newton_tol, newton_max)
    if np.any(u[:-1] <= 0):
        raise SolverError("continuation left the positive branch")
    return _result(m, g, result.omega, grid, u, 0, steps, (), (MINIMALITY_FLAG,))


def _result(m, g, omega, grid, u, passes, steps, brackets, flags) -> GroundStateResult:
    f = EquivariantField(grid, m, u.astype(complex))
    p = potentials(f)
    lap = apply_laplacian(u, grid, m)
    res = _residual(u, grid, m, g, omega)
    rel = np.sqrt(integrate(grid, res**2) / integrate(grid, lap**2))
    v = potential_array(u, p.a_theta, p.a_zero, grid, m, g)
    alpha = integrate(grid, u * (lap - v * u)) / integrate(grid, u**2)
    return GroundStateResult(
        m=int(m),
        g=float(g),
        omega=float(omega),
        profile=f,
        charge=charge(f),
        energy=energy(f, p, g),
        energy_bogomolnyi=energy_bogomolnyi(f, p, g),
        residual=float(rel),
        alpha=float(alpha),
        picard_passes=passes,
        newton_steps=steps,
        brackets=brackets,
        flags=flags,
    )


def stationary_residual(result: GroundStateResult) -> float:
    """``||Delta_m u - omega u - V u|| / ||Delta_m u||`` under the profile's own potentials."""
    return result.residual


@dataclass(frozen=True)
class ThresholdCharge:
    m: int
    g: float
    value: float
    flags: tuple[str, ...]


def threshold_charge(m: int, g: float, result: GroundStateResult | None = None, **kwargs) -> ThresholdCharge:
    """Charge of the computed zero-energy standing wave, a candidate for the threshold.

    At ``g = 1`` this is the exact soliton charge ``8 pi (m+1)``.  For
    ``g > 1`` minimality over all standing waves is not checked, which the
    flags record.
    """
    if g == 1:
        return ThresholdCharge(int(m), 1.0, soliton_charge(m), ())
    if result is None:
        result = groundstate_g(m, g, **kwargs)
    return ThresholdCharge(int(m), float(g), result.charge, (MINIMALITY_FLAG,))
