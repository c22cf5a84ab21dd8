"""Static soliton, symmetry actions and the pseudoconformal blowup family."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import EquivariantField, RadialGrid, boundary_fraction, field_from_function


@dataclass(frozen=True)
class SolitonSpec:
    m: int = 0
    lam: float = 1.0
    gamma: float = 0.0
    T: float | None = None

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.T is not None and not self.T > 0:
            raise ValueError("blowup time T must be positive")


def soliton_q(r: np.ndarray, m: int) -> np.ndarray:
    """``Q^(m)(r) = sqrt(8)(m+1) r^m / (1 + r^{2(m+1)})``."""
    r = np.asarray(r, dtype=float)
    return np.sqrt(8.0) * (m + 1) * r**m / (1.0 + r ** (2 * (m + 1)))


def soliton_q_dr(r: np.ndarray, m: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    t = r ** (2 * (m + 1))
    c = np.sqrt(8.0) * (m + 1)
    # d/dr [r^m/(1+t)] = r^{m-1} (m - (m+2) t) / (1+t)^2
    return c * r ** (m - 1) * (m - (m + 2) * t) / (1.0 + t) ** 2 if m > 0 else c * (-2 * r) / (1.0 + t) ** 2


def soliton_a_theta(r: np.ndarray, m: int) -> np.ndarray:
    """Closed form ``A_theta[Q^(m)] = -2(m+1) t/(1+t)``, ``t = r^{2(m+1)}``."""
    t = np.asarray(r, dtype=float) ** (2 * (m + 1))
    return -2.0 * (m + 1) * t / (1.0 + t)


def soliton_lambda_q(r: np.ndarray, m: int) -> np.ndarray:
    """``Lambda Q = (1 + r d_r) Q`` in closed form."""
    r = np.asarray(r, dtype=float)
    return soliton_q(r, m) + r * soliton_q_dr(r, m)


def soliton_profile(m: int, grid: RadialGrid) -> EquivariantField:
    return field_from_function(lambda r: soliton_q(r, m).astype(complex), grid, m)


def soliton_charge(m: int) -> float:
    return 8.0 * np.pi * (m + 1)


def apply_scaling(f: EquivariantField, lam: float, warn_fraction: float = 1e-6) -> EquivariantField:
    """``lam * u(lam r)``; exact when ``f`` knows its closed form, spline otherwise."""
    if not lam > 0:
        raise ValueError("scaling factor must be positive")
    lam = float(lam)
    grid = f.grid
    if f.source is not None:
        src = f.source
        fn = lambda r: lam * src(lam * np.asarray(r, dtype=float))  # noqa: E731
        out = field_from_function(fn, grid, f.m)
    else:
        out = f.with_values(lam * f.evaluate(lam * grid.r))
    if lam < 1 and boundary_fraction(out) > warn_fraction:
        warnings.warn(f"scaling by {lam} pushes charge to r_max={grid.r_max}", stacklevel=2)
    return out


def apply_phase(f: EquivariantField, gamma: float) -> EquivariantField:
    """Global phase rotation ``e^{i gamma} u``."""
    return np.exp(1j * gamma) * f


def pc_profile(spec: SolitonSpec, t: float):
    """Closed-form profile of ``PC_T`` applied to ``e^{i gamma} lam Q(lam .)`` at time ``t``."""
    if spec.T is None:
        raise ValueError("SolitonSpec needs a blowup time T")
    T = spec.T
    if t >= T:
        raise ValueError(f"time {t} is not before the blowup time {T}")
    tau = T - t
    m, lam, phase = spec.m, spec.lam, np.exp(1j * spec.gamma)

    def fn(r):
        r = np.asarray(r, dtype=float)
        inner = phase * lam * soliton_q(lam * r / tau, m)
        return inner * np.exp(-1j * r**2 / (4.0 * tau)) / tau

    return fn


def pc_soliton_exact(spec: SolitonSpec, t: float, grid: RadialGrid) -> EquivariantField:
    """Exact finite-time blowup solution ``PC_T[e^{i gamma} lam Q(lam .)](t)``.

    The static soliton carries no time phase, so only the spatial rescaling,
    the ``1/(T-t)`` amplitude and the converging chirp survive.
    """
    return field_from_function(pc_profile(spec, t), grid, spec.m)


def soliton_field(spec: SolitonSpec, grid: RadialGrid, t: float = 0.0) -> EquivariantField:
    if spec.T is not None:
        return pc_soliton_exact(spec, t, grid)
    f = apply_scaling(soliton_profile(spec.m, grid), spec.lam)
    return apply_phase(f, spec.gamma)
