"""Radial grid, equivariant fields, quadrature and the m-equivariant Laplacian.

The half-line is discretized with a cell-centred uniform grid
``r_j = (j - 1/2) h`` (``h = r_max / n``) so that no node sits on the axis.
Every integral is taken against the area measure ``2*pi*r dr``; the node
weights ``w_j = r_j h`` integrate ``f(r) r dr`` with the midpoint rule.

Two derivative discretizations coexist on purpose:

* a *staggered* difference ``(u_{j+1} - u_j)/h`` living on the cell faces
  ``r_{j+1/2} = j h``.  Its weighted quadratic form is exactly the one of the
  flux-form Laplacian, so gradient norms, energies and the time stepper share
  one discrete Dirichlet form.
* a *node-centred* derivative (centred inside, even/odd ghost at the axis,
  one-sided at ``r_n``) used for pointwise operators such as the Bogomol'nyi
  operator and the virial flux.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi

Profile = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell-centred uniform discretization of ``(0, r_max)``."""

    r_max: float
    n: int
    r: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.r_max / self.n

    @property
    def faces(self) -> np.ndarray:
        """Interior faces ``r_{j+1/2} = j h`` for ``j = 1..n-1``."""
        return self.h * np.arange(1, self.n, dtype=float)

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (self.n == other.n and self.r_max == other.r_max)


def build_grid(r_max: float, n: int) -> RadialGrid:
    """Build the cell-centred grid with midpoint weights for ``int f r dr``."""
    if not np.isfinite(r_max) or r_max <= 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    if int(n) != n or n < 16:
        raise ValueError(f"n must be an integer >= 16, got {n}")
    n = int(n)
    h = r_max / n
    r = (np.arange(1, n + 1, dtype=float) - 0.5) * h
    w = r * h
    r.setflags(write=False)
    w.setflags(write=False)
    return RadialGrid(float(r_max), n, r, w)


@dataclass(frozen=True, eq=False)
class EquivariantField:
    """Radial profile ``u(r)`` of ``phi = e^{i m theta} u(r)``.

    ``source`` optionally carries the closed-form profile the samples came
    from; scaling and modulation use it to resample exactly instead of
    interpolating.
    """

    grid: RadialGrid
    m: int
    u: np.ndarray = field(repr=False)
    source: Profile | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 0 or int(self.m) != self.m:
            raise ValueError(f"equivariance index must be a non-negative integer, got {self.m}")
        u = np.asarray(self.u, dtype=complex)
        if u.shape != (self.grid.n,):
            raise ValueError(f"samples have shape {u.shape}, grid expects ({self.grid.n},)")
        if not np.all(np.isfinite(u)):
            raise ValueError("field samples must be finite")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    def with_values(self, u: np.ndarray, source: Profile | None = None) -> "EquivariantField":
        return EquivariantField(self.grid, self.m, u, source)

    def __mul__(self, c) -> "EquivariantField":
        c = complex(c)
        src = None if self.source is None else _scaled_profile(self.source, c)
        return EquivariantField(self.grid, self.m, c * self.u, src)

    __rmul__ = __mul__

    def __add__(self, other: "EquivariantField") -> "EquivariantField":
        _check_compatible(self, other)
        src = None
        if self.source is not None and other.source is not None:
            src = _sum_profile(self.source, other.source)
        return EquivariantField(self.grid, self.m, self.u + other.u, src)

    def __sub__(self, other: "EquivariantField") -> "EquivariantField":
        return self + (-1.0) * other

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        """Profile at arbitrary radii: closed form when known, else a cubic spline."""
        r = np.asarray(r, dtype=float)
        if self.source is not None:
            return np.asarray(self.source(r), dtype=complex)
        return interpolate_profile(self, r)


def _scaled_profile(src: Profile, c: complex) -> Profile:
    return lambda r: c * src(r)


def _sum_profile(a: Profile, b: Profile) -> Profile:
    return lambda r: a(r) + b(r)


def _check_compatible(f: EquivariantField, g: EquivariantField) -> None:
    if not f.grid.same_as(g.grid):
        raise ValueError("fields live on different grids")
    if f.m != g.m:
        raise ValueError(f"equivariance mismatch: {f.m} vs {g.m}")


def field_from_function(fn: Profile, grid: RadialGrid, m: int) -> EquivariantField:
    return EquivariantField(grid, m, np.asarray(fn(grid.r), dtype=complex), fn)


def zero_field(grid: RadialGrid, m: int) -> EquivariantField:
    return field_from_function(lambda r: np.zeros_like(r, dtype=complex), grid, m)


def interpolate_profile(f: EquivariantField, r: np.ndarray) -> np.ndarray:
    """Cubic-spline resampling with the ``r^m`` parity mirrored across the axis.

    Values beyond the outer node decay linearly to zero at ``r_max`` and
    vanish past it.
    """
    from scipy.interpolate import CubicSpline

    grid = f.grid
    k = min(8, grid.n)
    sign = -1.0 if f.m % 2 else 1.0
    rr = np.concatenate([-grid.r[:k][::-1], grid.r, [grid.r_max]])
    uu = np.concatenate([sign * f.u[:k][::-1], f.u, [0.0]])
    spline = CubicSpline(rr, uu)
    out = np.asarray(spline(np.abs(r)), dtype=complex)
    out[np.abs(r) >= grid.r_max] = 0.0
    return out


# --- quadrature ---------------------------------------------------------------------


def integrate(grid: RadialGrid, density: np.ndarray) -> float:
    """Area integral ``2 pi sum_j w_j density_j``."""
    return float(TWO_PI * np.dot(grid.w, density))


def inner(f: EquivariantField, g: EquivariantField) -> float:
    """Real inner product ``(f, g)_r = int Re(f conj(g)) dx``."""
    _check_compatible(f, g)
    return integrate(f.grid, np.real(f.u * np.conj(g.u)))


def charge(f: EquivariantField) -> float:
    return integrate(f.grid, np.abs(f.u) ** 2)


def l2_norm(f: EquivariantField) -> float:
    return float(np.sqrt(charge(f)))


def l4_norm_4(f: EquivariantField) -> float:
    """``||u||_{L^4}^4`` with the area measure."""
    return integrate(f.grid, np.abs(f.u) ** 4)


def half_cell_weights(grid: RadialGrid, m: int) -> np.ndarray:
    """Weights of ``int_{r_j - h/2}^{r_j} s ds``; the first uses the ``r^m`` law.

    Near the axis ``|u|^2 ~ r^{2m}``, so the innermost half cell integrates
    ``F_1 (s/r_1)^{2m} s`` exactly.
    """
    h = grid.h
    om = 0.5 * h * (grid.r - 0.25 * h)
    om = om.copy()
    om[0] = grid.r[0] ** 2 / (2.0 * m + 2.0)
    return om


def cumulative(grid: RadialGrid, m: int, F: np.ndarray) -> np.ndarray:
    """``int_0^{r_j} F(s) s ds``: midpoint cells below ``r_j`` plus the half cell.

    ``F`` may carry extra trailing axes (columns are integrated independently).
    """
    F = np.asarray(F)
    w = _bcast(grid.w, F)
    om = _bcast(half_cell_weights(grid, m), F)
    return np.cumsum(w * F, axis=0) - (w - om) * F


def tail(grid: RadialGrid, m: int, G: np.ndarray) -> np.ndarray:
    """``int_{r_k}^{r_max} G(s) ds`` as the exact weighted transpose of ``cumulative``.

    For every ``F, G``: ``sum w (cumulative F) G / r == sum w F tail(G)``.
    """
    G = np.asarray(G)
    h = grid.h
    ratio = _bcast(half_cell_weights(grid, m) / grid.w, G)
    hg = h * G
    rev = np.cumsum(hg[::-1], axis=0)[::-1]
    return rev - (1.0 - ratio) * hg


def _bcast(v: np.ndarray, like: np.ndarray) -> np.ndarray:
    return v.reshape(v.shape + (1,) * (np.ndim(like) - 1))


# --- derivatives --------------------------------------------------------------------


def staggered_difference(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``(u_{j+1} - u_j)/h`` on the interior faces ``j h``, ``j = 1..n-1``."""
    return np.diff(np.asarray(u), axis=0) / grid.h


def radial_derivative(u: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    """Node-centred ``d/dr``.

    Centred differences inside; the axis ghost ``u(-r_1) = (-1)^m u(r_1)``
    closes the first stencil (the grid is symmetric about the axis, so the
    ghost sits exactly one spacing below ``r_1``); second-order one-sided
    differences at ``r_n``.
    """
    u = np.asarray(u)
    h = grid.h
    d = np.empty_like(u, dtype=np.result_type(u, float))
    d[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    parity = -1.0 if m % 2 else 1.0
    d[0] = (u[1] - parity * u[0]) / (2 * h)
    d[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return d


def radial_derivative_matrix(grid: RadialGrid, m: int):
    """Sparse matrix of :func:`radial_derivative`."""
    from scipy import sparse

    n, h = grid.n, grid.h
    main = np.zeros(n)
    upper = np.full(n - 1, 1.0 / (2 * h))
    lower = np.full(n - 1, -1.0 / (2 * h))
    parity = -1.0 if m % 2 else 1.0
    main[0] = -parity / (2 * h)
    D = sparse.diags([lower, main, upper], [-1, 0, 1], format="lil")
    D[n - 1, n - 1] = 3 / (2 * h)
    D[n - 1, n - 2] = -4 / (2 * h)
    D[n - 1, n - 3] = 1 / (2 * h)
    return D.tocsr()


def laplacian_bands(grid: RadialGrid, m: int, decay: float = 0.0) -> np.ndarray:
    """Tridiagonal bands (upper, main, lower) of the flux-form ``Delta_m``.

    ``(Delta_m u)_j = [r_{j+1/2}(u_{j+1}-u_j) - r_{j-1/2}(u_j-u_{j-1})]/(r_j h^2) - m^2 u_j / r_j^2``
    with ``r_{1/2} = 0`` (the axis flux vanishes, so any even/odd ghost gives
    the same row) and a zero-flux wall at ``r_max``.  The operator is
    symmetric in the weighted inner product ``sum w_j u_j v_j`` and its
    quadratic form is the staggered gradient norm.

    ``decay > 0`` replaces the wall by the far-field condition
    ``r u' = -decay * u`` at ``r_max`` (matching a tail ``~ r^{-decay}``);
    this only shifts the last diagonal entry, so symmetry is kept.
    """
    r, h = grid.r, grid.h
    faces = grid.faces
    right = np.concatenate([faces, [0.0]]) / (r * h * h)
    left = np.concatenate([[0.0], faces]) / (r * h * h)
    main = -(right + left) - (m * m) / r**2
    main[-1] -= decay / (r[-1] * h)
    ab = np.zeros((3, grid.n))
    ab[0, 1:] = right[:-1]
    ab[1] = main
    ab[2, :-1] = left[1:]
    return ab


def apply_laplacian(u: np.ndarray, grid: RadialGrid, m: int, decay: float = 0.0) -> np.ndarray:
    ab = laplacian_bands(grid, m, decay)
    u = np.asarray(u)
    out = ab[1] * u if u.ndim == 1 else _bcast(ab[1], u) * u
    out[:-1] += _bcast(ab[0, 1:], u[1:]) * u[1:]
    out[1:] += _bcast(ab[2, :-1], u[:-1]) * u[:-1]
    return out


def laplacian_m(f: EquivariantField) -> EquivariantField:
    return f.with_values(apply_laplacian(f.u, f.grid, f.m))


# --- norms --------------------------------------------------------------------------


def gradient_sq(f: EquivariantField) -> float:
    """``||d_r u||_{L^2}^2`` from the staggered differences (Dirichlet form)."""
    grid = f.grid
    du = staggered_difference(f.u, grid)
    return float(TWO_PI * grid.h * np.dot(grid.faces, np.abs(du) ** 2))


def h1m_seminorm_sq(f: EquivariantField) -> float:
    """``||d_r u||^2 + ||(m/r) u||^2``; equals ``-(u, Delta_m u)_r`` exactly."""
    grid = f.grid
    return gradient_sq(f) + integrate(grid, (f.m / grid.r) ** 2 * np.abs(f.u) ** 2)


def h0_weighted_sq(f: EquivariantField) -> float:
    """The m = 0 replacement norm ``||d_r u||^2 + ||(1+r)^{-1} u||^2``."""
    grid = f.grid
    return gradient_sq(f) + integrate(grid, np.abs(f.u) ** 2 / (1.0 + grid.r) ** 2)


def random_profile(rng: np.random.Generator, grid: RadialGrid, m: int, bumps: int = 3, reach: float = 10.0) -> EquivariantField:
    """Sum of chirped Gaussian shells ``r^m e^{-(r-c)^2/s^2 + i b r^2}`` with random complex weights.

    Centres lie in ``[0, reach]``; the result is smooth, localized and has the
    ``r^m`` behaviour at the axis.
    """
    centers = rng.uniform(0.0, reach, bumps)
    widths = rng.uniform(0.5, 2.0, bumps)
    chirps = rng.normal(0.0, 0.5, bumps)
    weights = rng.normal(size=bumps) + 1j * rng.normal(size=bumps)

    def fn(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=complex)
        for c, s, b, a in zip(centers, widths, chirps, weights):
            out += a * np.exp(-(((r - c) / s) ** 2) + 1j * b * r**2)
        return r**m * out / (1.0 + r**m)

    return field_from_function(fn, grid, m)


def charge_fraction_inside(f: EquivariantField, radius: float) -> float:
    """Share of the charge carried by cells with ``r < radius``."""
    total = charge(f)
    if total == 0:
        return 0.0
    inside = f.grid.r < radius
    return integrate(f.grid, np.where(inside, np.abs(f.u) ** 2, 0.0)) / total


def strauss_ratio(f: EquivariantField) -> float:
    """``sup |u| r^{1/2} / (||d_r u||^{1/2} ||u||^{1/2})``; invariant under L^2 scaling."""
    q = charge(f)
    if q == 0.0:
        raise ValueError("Strauss ratio is undefined for the zero field")
    num = float(np.max(np.abs(f.u) * np.sqrt(f.grid.r)))
    return num / (gradient_sq(f) ** 0.25 * q**0.25)


def boundary_fraction(f: EquivariantField, cells: int = 8) -> float:
    """Fraction of the charge sitting in the outermost ``cells`` cells."""
    total = charge(f)
    if total == 0.0:
        return 0.0
    grid = f.grid
    return float(TWO_PI * np.dot(grid.w[-cells:], np.abs(f.u[-cells:]) ** 2) / total)


def check_regularity(f: EquivariantField, c: float = 50.0) -> bool:
    """Soft near-axis check ``|u_1| <= C r_1^m max|u| / r_ref^m``; warns only."""
    grid = f.grid
    peak = float(np.max(np.abs(f.u)))
    if peak == 0.0 or f.m == 0:
        return True
    r_ref = float(grid.r[np.argmax(np.abs(f.u))])
    bound = c * (grid.r[0] / max(r_ref, grid.r[0])) ** f.m * peak
    ok = abs(f.u[0]) <= bound
    if not ok:
        warnings.warn(f"field is not ~r^{f.m} near the axis: |u_1|={abs(f.u[0]):.3e}", stacklevel=2)
    return ok


# --- persistence --------------------------------------------------------------------


def save_field(path: str | Path, f: EquivariantField, extra: dict[str, np.ndarray] | None = None) -> None:
    """Write ``<path>.csv`` (r, re_u, im_u[, extra columns]) and ``<path>.json`` header."""
    path = Path(path)
    cols = {"r": f.grid.r, "re_u": f.u.real, "im_u": f.u.imag}
    for key, val in (extra or {}).items():
        cols[key] = np.asarray(val, dtype=float)
    header = ",".join(cols)
    data = np.column_stack(list(cols.values()))
    np.savetxt(path.with_suffix(".csv"), data, delimiter=",", header=header, comments="", fmt="%.17e")
    meta = {"m": f.m, "n": f.grid.n, "r_max": f.grid.r_max}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_field(path: str | Path) -> EquivariantField:
    path = Path(path)
    csv_path = path if path.suffix == ".csv" else path.with_suffix(".csv")
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    grid = build_grid(meta["r_max"], meta["n"])
    if not np.allclose(data["r"], grid.r, rtol=1e-12, atol=0.0):
        raise ValueError(f"{csv_path}: radii do not match the header grid")
    return EquivariantField(grid, int(meta["m"]), data["re_u"] + 1j * data["im_u"])
