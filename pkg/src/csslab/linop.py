"""Real-linear operator algebra around the soliton.

Operators act on complex profiles but are only R-linear; matrices act on the
stacked real vector ``(Re eps, Im eps)`` of length ``2n``.  Every adjoint is
the transpose in the discrete weighted inner product ``(u, v)_r = 2 pi sum_j
w_j Re(u_j conj(v_j))``, so ``curly_L = L_Q^* L_Q`` is an exact matrix
identity.

The linearization uses the quadrature ``A_theta[Q]``.  Because that
quadrature is quadratic in ``u``, ``A_theta[Q + eps]`` polarizes exactly and
``D_+(Q + eps) - D_+ Q = L_Q eps + N_Q[eps]`` holds to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .gauge import a_theta_array
from .grid import (
    EquivariantField,
    RadialGrid,
    cumulative,
    h0_weighted_sq,
    h1m_seminorm_sq,
    inner,
    radial_derivative,
    tail,
)
from .soliton import soliton_lambda_q, soliton_q

MAX_DENSE_N = 8192


@dataclass(frozen=True, eq=False)
class RealPairField:
    re: np.ndarray = field(repr=False)
    im: np.ndarray = field(repr=False)
    m: int
    grid: RadialGrid = field(repr=False)

    def __post_init__(self):
        n = self.grid.n
        if np.shape(self.re) != (n,) or np.shape(self.im) != (n,):
            raise ValueError("real/imaginary parts must match the grid length")

    @classmethod
    def from_field(cls, f: EquivariantField) -> "RealPairField":
        return cls(f.u.real.copy(), f.u.imag.copy(), f.m, f.grid)

    def to_field(self) -> EquivariantField:
        return EquivariantField(self.grid, self.m, self.re + 1j * self.im)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.re, self.im])


@dataclass(frozen=True, eq=False)
class LinearizationAtQ:
    m: int
    grid: RadialGrid = field(repr=False)
    q: np.ndarray = field(repr=False)
    a_theta: np.ndarray = field(repr=False)
    residual: float

    @property
    def q_field(self) -> EquivariantField:
        return EquivariantField(self.grid, self.m, self.q)


def linearize(m: int, grid: RadialGrid, tol: float = 1e-2) -> LinearizationAtQ:
    """Linearization at ``Q^(m)``; rejects grids where ``||D_+ Q|| / ||d_r Q||`` exceeds ``tol``."""
    q = soliton_q(grid.r, m).astype(float)
    at = a_theta_array(q, grid, m)
    res = bogomolnyi_faces(q, grid, m)
    rel = float(np.sqrt(face_norm_sq(grid, res) / face_norm_sq(grid, np.diff(q) / grid.h)))
    if rel > tol:
        raise ValueError(f"grid too coarse: Bogomol'nyi residual of Q is {rel:.3e}")
    return LinearizationAtQ(m, grid, q, at, rel)


def _u(x) -> np.ndarray:
    if isinstance(x, EquivariantField):
        return x.u
    if isinstance(x, RealPairField):
        return x.re + 1j * x.im
    return np.asarray(x)


def _wrap(like, grid: RadialGrid, m: int, u: np.ndarray):
    if isinstance(like, RealPairField):
        return RealPairField(u.real.copy(), u.imag.copy(), m, grid)
    return EquivariantField(grid, m, u)


def b_array(f: np.ndarray, g: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    return cumulative(grid, m, np.real(np.conj(f) * g)) / grid.r


def b_adj_array(f: np.ndarray, h: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    return f * tail(grid, m, np.real(h))


def b_op(f: EquivariantField, g: EquivariantField) -> EquivariantField:
    """``B_f g = (1/r) int_0^r Re(conj(f) g) s ds`` (real-valued)."""
    return g.with_values(b_array(f.u, g.u, g.grid, g.m).astype(complex))


def b_adj(f: EquivariantField, h: EquivariantField) -> EquivariantField:
    """``B_f^* h = f int_r^inf Re(h) ds``; the weighted transpose of :func:`b_op`."""
    return h.with_values(b_adj_array(f.u, h.u, h.grid, h.m))


def lambda_gen(f: EquivariantField) -> EquivariantField:
    """``Lambda f = (1 + r d_r) f``."""
    return f.with_values(f.u + f.grid.r * radial_derivative(f.u, f.grid, f.m))


def _check(lin: LinearizationAtQ, u: np.ndarray) -> None:
    if u.shape != (lin.grid.n,):
        raise ValueError("perturbation does not live on the linearization grid")


# --- face-centred Bogomol'nyi operator ------------------------------------------------
#
# L_Q is evaluated on the interior faces r_{j+1/2} = j h.  A centred nodal
# derivative would annihilate grid-scale sawtooth modes and create a spurious
# near-kernel; the compact face difference does not, and the discrete
# equation L_Q eps = 0 becomes a one-step recurrence with exactly one
# solution per component, mirroring the two-dimensional continuum kernel.


@dataclass(frozen=True, eq=False)
class FaceValues:
    """Samples on the interior faces ``r_{j+1/2}``, ``j = 1..n-1``."""

    values: np.ndarray = field(repr=False)
    m: int
    grid: RadialGrid = field(repr=False)

    def norm_sq(self) -> float:
        return face_norm_sq(self.grid, self.values)


def face_weights(grid: RadialGrid) -> np.ndarray:
    """Midpoint weights ``r_{j+1/2} h`` of ``int f r dr`` on the interior faces."""
    return grid.faces * grid.h


def face_norm_sq(grid: RadialGrid, v: np.ndarray) -> float:
    return float(2 * np.pi * np.dot(face_weights(grid), np.abs(v) ** 2))


def face_average(u: np.ndarray) -> np.ndarray:
    return 0.5 * (u[1:] + u[:-1])


def face_cumulative(grid: RadialGrid, F: np.ndarray) -> np.ndarray:
    """``int_0^{r_{j+1/2}} F s ds`` by whole midpoint cells."""
    return np.cumsum(grid.w * F)[:-1]


def face_a_theta(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    return -0.5 * face_cumulative(grid, np.abs(u) ** 2)


def bogomolnyi_faces(u: np.ndarray, grid: RadialGrid, m: int) -> np.ndarray:
    """``D_+ u`` on faces: ``(u_{j+1}-u_j)/h - (m + A_theta)/r * (u_j + u_{j+1})/2``."""
    u = np.asarray(u)
    a = (m + face_a_theta(u, grid)) / grid.faces
    return np.diff(u) / grid.h - a * face_average(u)


def b_faces(f: np.ndarray, g: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``B_f g`` on faces with whole-cell quadrature."""
    return face_cumulative(grid, np.real(np.conj(f) * g)) / grid.faces


def l_q_array(lin: LinearizationAtQ, eps: np.ndarray) -> np.ndarray:
    """``L_Q eps = D_+^{(Q)} eps + Q B_Q eps`` on faces."""
    grid, m, q = lin.grid, lin.m, lin.q
    a = (m + face_a_theta(q, grid)) / grid.faces
    return np.diff(eps) / grid.h - a * face_average(eps) + face_average(q) * b_faces(q, eps, grid)


def n_q_array(lin: LinearizationAtQ, eps: np.ndarray) -> np.ndarray:
    """``N_Q[eps] = eps B_Q eps + 1/2 Q B_eps eps + 1/2 eps B_eps eps`` on faces."""
    grid, q = lin.grid, lin.q
    ef, qf = face_average(eps), face_average(q)
    b_qe = b_faces(q, eps, grid)
    b_ee = b_faces(eps, eps, grid)
    return ef * b_qe + 0.5 * qf * b_ee + 0.5 * ef * b_ee


def l_q_adj_array(lin: LinearizationAtQ, f: np.ndarray) -> np.ndarray:
    """Weighted transpose of :func:`l_q_array` (faces to nodes), matrix-free."""
    grid, m, q = lin.grid, lin.m, lin.q
    g = face_weights(grid) * f
    a = (m + face_a_theta(q, grid)) / grid.faces
    zero = np.zeros(1, dtype=g.dtype)
    out = (np.concatenate([zero, g]) - np.concatenate([g, zero])) / grid.h
    ag = a * g
    out -= 0.5 * (np.concatenate([zero, ag]) + np.concatenate([ag, zero]))
    x = face_average(q) / grid.faces * g.real
    rev = np.concatenate([np.cumsum(x[::-1])[::-1], [0.0]])
    out = out + grid.w * q * rev
    return out / grid.w


def _as_complex(lin: LinearizationAtQ, eps) -> np.ndarray:
    u = _u(eps).astype(complex)
    _check(lin, u)
    return u


def l_q(lin: LinearizationAtQ, eps) -> FaceValues:
    return FaceValues(l_q_array(lin, _as_complex(lin, eps)), lin.m, lin.grid)


def n_q(lin: LinearizationAtQ, eps) -> FaceValues:
    return FaceValues(n_q_array(lin, _as_complex(lin, eps)), lin.m, lin.grid)


def l_q_adj(lin: LinearizationAtQ, f: FaceValues | np.ndarray) -> EquivariantField:
    """``L_Q^* f = D_+^{(Q)*} f + B_Q^*(Q f)`` as the weighted transpose."""
    v = f.values if isinstance(f, FaceValues) else np.asarray(f)
    if v.shape != (lin.grid.n - 1,):
        raise ValueError("adjoint input must live on the interior faces")
    return EquivariantField(lin.grid, lin.m, l_q_adj_array(lin, v.astype(complex)))


def curly_l(lin: LinearizationAtQ, eps):
    """``curly_L_Q = L_Q^* L_Q`` (nodes to nodes)."""
    u = _as_complex(lin, eps)
    return _wrap(eps, lin.grid, lin.m, l_q_adj_array(lin, l_q_array(lin, u)))


# --- dense assembly -----------------------------------------------------------------


def _face_cumulative_matrix(grid: RadialGrid) -> np.ndarray:
    n = grid.n
    return np.tril(np.broadcast_to(grid.w, (n - 1, n)))


def _l_q_blocks(lin: LinearizationAtQ) -> tuple[np.ndarray, np.ndarray]:
    """``(n-1) x n`` blocks of ``L_Q`` acting on ``Re eps`` and ``Im eps``."""
    grid, m, q = lin.grid, lin.m, lin.q
    n, h = grid.n, grid.h
    a = (m + face_a_theta(q, grid)) / grid.faces
    idx = np.arange(n - 1)
    base = np.zeros((n - 1, n))
    base[idx, idx] = -1.0 / h - 0.5 * a
    base[idx, idx + 1] = 1.0 / h - 0.5 * a
    coupling = (face_average(q) / grid.faces)[:, None] * _face_cumulative_matrix(grid) * q[None, :]
    return base + coupling, base


def assemble_matrix(which: str, lin: LinearizationAtQ) -> np.ndarray:
    """Dense matrix on ``(Re, Im)`` stacks.

    ``"L_Q"`` is ``2(n-1) x 2n`` (nodes to faces); ``"curly_L"`` is ``2n x 2n``.
    """
    n = lin.grid.n
    if n > MAX_DENSE_N:
        raise MemoryError(f"dense assembly refused for n={n} > {MAX_DENSE_N}")
    re_block, im_block = _l_q_blocks(lin)
    M = linalg.block_diag(re_block, im_block)
    if which == "L_Q":
        return M
    if which == "L_Q_adj":
        return adjoint_matrix(M, lin.grid)
    if which == "curly_L":
        return adjoint_matrix(M, lin.grid) @ M
    raise ValueError(f"unknown operator {which!r}; expected 'L_Q', 'L_Q_adj' or 'curly_L'")


def pair_weights(grid: RadialGrid) -> np.ndarray:
    return np.concatenate([grid.w, grid.w])


def pair_face_weights(grid: RadialGrid) -> np.ndarray:
    wf = face_weights(grid)
    return np.concatenate([wf, wf])


def adjoint_matrix(M: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """``W_n^{-1} M^T W_f``: adjoint of a nodes-to-faces matrix."""
    return (M.T * pair_face_weights(grid)[None, :]) / pair_weights(grid)[:, None]


def weighted_asymmetry(M: np.ndarray, grid: RadialGrid) -> float:
    """``||W M - (W M)^T|| / ||W M||`` (Frobenius) for a nodes-to-nodes matrix."""
    WM = pair_weights(grid)[:, None] * M
    return float(np.linalg.norm(WM - WM.T) / np.linalg.norm(WM))


def min_rayleigh(M: np.ndarray, grid: RadialGrid) -> float:
    """Smallest ``(x, M x)_W / (x, x)_W``; symmetric part only."""
    s = np.sqrt(pair_weights(grid))
    S = s[:, None] * M / s[None, :]
    return float(linalg.eigvalsh(0.5 * (S + S.T), subset_by_index=[0, 0])[0])


def max_rayleigh(M: np.ndarray, grid: RadialGrid) -> float:
    s = np.sqrt(pair_weights(grid))
    S = s[:, None] * M / s[None, :]
    k = S.shape[0]
    return float(linalg.eigvalsh(0.5 * (S + S.T), subset_by_index=[k - 1, k - 1])[0])


# --- coercivity ---------------------------------------------------------------------


def seminorm_gram(grid: RadialGrid, m: int) -> np.ndarray:
    """Gram matrix (per component) of ``||u||_{H^1_m}^2``; the weighted m=0 norm when ``m = 0``."""
    n, h = grid.n, grid.h
    faces = grid.faces
    G = np.zeros((n, n))
    idx = np.arange(n - 1)
    G[idx, idx] += faces / h
    G[idx + 1, idx + 1] += faces / h
    G[idx, idx + 1] -= faces / h
    G[idx + 1, idx] -= faces / h
    zero_order = (m / grid.r) ** 2 if m > 0 else 1.0 / (1.0 + grid.r) ** 2
    G[np.diag_indices(n)] += grid.w * zero_order
    return 2 * np.pi * G


def _norm_sq(lin: LinearizationAtQ, f: EquivariantField) -> float:
    return h1m_seminorm_sq(f) if lin.m > 0 else h0_weighted_sq(f)


def kernel_residuals(lin: LinearizationAtQ) -> dict[str, float]:
    """``||L_Q f|| / ||f||_{H^1_m}`` for ``f = iQ`` and ``f = Lambda Q`` (closed-form samples)."""
    grid, m = lin.grid, lin.m
    out = {}
    for name, vec in (("iQ", 1j * lin.q), ("LambdaQ", soliton_lambda_q(grid.r, m).astype(complex))):
        norm = np.sqrt(_norm_sq(lin, EquivariantField(grid, m, vec)))
        out[name] = float(np.sqrt(face_norm_sq(grid, l_q_array(lin, vec))) / norm)
    return out


@dataclass(frozen=True)
class CoercivityResult:
    ratio: float
    rayleigh: np.ndarray
    unconstrained_ratio: float


def coercivity_ratio(lin: LinearizationAtQ, n_report: int = 10) -> CoercivityResult:
    """``inf ||L_Q u|| / ||u||`` over ``Re u _|_ Lambda Q``, ``Im u _|_ Q``.

    Solves ``A x = mu B x`` with ``A = M^T W_f M`` (``M`` the matrix of
    ``L_Q``) and ``B`` the seminorm Gram matrix, restricted to the null space
    of the two orthogonality constraints.  Returns ``sqrt(mu_min)``, the
    lowest ``n_report`` constrained quotients ``mu`` and the unconstrained
    minimum (which sees the kernel).
    """
    grid, m = lin.grid, lin.m
    M = assemble_matrix("L_Q", lin)
    A = M.T @ ((2 * np.pi * pair_face_weights(grid))[:, None] * M)
    g1 = seminorm_gram(grid, m)
    B = linalg.block_diag(g1, g1)
    n = grid.n
    cons = np.zeros((2, 2 * n))
    cons[0, :n] = grid.w * soliton_lambda_q(grid.r, m)
    cons[1, n:] = grid.w * lin.q
    try:
        mu_free = linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])
        Z = linalg.null_space(cons)
        mu = linalg.eigh(Z.T @ A @ Z, Z.T @ B @ Z, eigvals_only=True, subset_by_index=[0, n_report - 1])
    except linalg.LinAlgError as exc:
        raise RuntimeError(f"generalized eigensolver failed: {exc}") from exc
    return CoercivityResult(
        ratio=float(np.sqrt(max(mu[0], 0.0))),
        rayleigh=np.asarray(mu),
        unconstrained_ratio=float(np.sqrt(max(mu_free[0], 0.0))),
    )


# --- energy expansion ---------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionTerms:
    two_energy: float
    two_energy_relative: float
    l_sq: float
    ln_sq: float

    @property
    def gap(self) -> float:
        """``|2 E[Q + eps] - ||L_Q eps||^2|``."""
        return abs(self.two_energy - self.l_sq)

    @property
    def relative_gap(self) -> float:
        """Same gap with the energy measured from the discrete soliton (``D_+ Q`` subtracted)."""
        return abs(self.two_energy_relative - self.l_sq)


def expansion_terms(lin: LinearizationAtQ, eps) -> ExpansionTerms:
    """Both sides of the self-dual energy expansion at ``Q + eps`` (``g = 1``).

    ``two_energy`` is ``||D_+(Q + eps)||^2`` on faces; ``two_energy_relative``
    subtracts the discrete residual ``D_+ Q`` first, which is what the
    continuum identity sees (there ``D_+ Q = 0``).
    """
    grid, m = lin.grid, lin.m
    e = _as_complex(lin, eps)
    d_full = bogomolnyi_faces(lin.q + e, grid, m)
    d_q = bogomolnyi_faces(lin.q.astype(complex), grid, m)
    le = l_q_array(lin, e)
    return ExpansionTerms(
        two_energy=face_norm_sq(grid, d_full),
        two_energy_relative=face_norm_sq(grid, d_full - d_q),
        l_sq=face_norm_sq(grid, le),
        ln_sq=face_norm_sq(grid, le + n_q_array(lin, e)),
    )


def energy_expansion_gap(lin: LinearizationAtQ, eps, delta: float = 1.0, relative: bool = False) -> float:
    """``|2 E[Q + delta eps] - ||L_Q (delta eps)||^2|``.

    ``relative=True`` measures the energy from the discrete soliton, which
    removes the ``O(h^2) delta`` cross term left by ``D_+ Q != 0`` on coarse grids.
    """
    terms = expansion_terms(lin, delta * _u(eps))
    return terms.relative_gap if relative else terms.gap


def expansion_slope(
    lin: LinearizationAtQ,
    eps,
    deltas=(1e-1, 10**-1.5, 1e-2, 10**-2.5),
    relative: bool = False,
) -> tuple[float, np.ndarray]:
    """Log-log slope of the expansion gap against ``delta`` and the gaps themselves."""
    d = np.asarray(deltas, dtype=float)
    gaps = np.array([energy_expansion_gap(lin, eps, x, relative) for x in d])
    slope = np.polyfit(np.log(d), np.log(gaps), 1)[0]
    return float(slope), gaps


def orthogonality(lin: LinearizationAtQ, eps: EquivariantField) -> tuple[float, float]:
    """``((Re eps, Lambda Q)_r, (Im eps, Q)_r)``."""
    lq = EquivariantField(lin.grid, lin.m, soliton_lambda_q(lin.grid.r, lin.m))
    q = lin.q_field
    return inner(eps.with_values(eps.u.real), lq), inner(eps.with_values(eps.u.imag), q)
