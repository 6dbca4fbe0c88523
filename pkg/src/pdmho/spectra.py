"""Symmetric tridiagonal eigensolver and the analytic oscillator states."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coord import CoordinateMap, Grid
from .operators import GridOperator, OperatorError, OscillatorConfig, ladder_A, ladder_B
from .profiles import MassProfile

QL_MAX_ITER = 60
INVERSE_ITERATIONS = 3


class EigenError(RuntimeError):
    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} (index {index})")
        self.index = index


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # shape (k, n), <v_i, v_j> h = delta_ij
    grid: Grid

    def __len__(self):
        return self.eigenvalues.size

    def vector(self, i):
        return self.eigenvectors[i]


def _fix_signs(vecs):
    for v in vecs:
        big = np.abs(v)
        first = np.flatnonzero(big > 1e-8 * big.max())[0]
        if v[first] < 0:
            v *= -1.0
    return vecs


def _bisection_path(d, e, k):
    n = d.size
    radius = np.abs(np.concatenate([[0.0], e])) + np.abs(np.concatenate([e, [0.0]]))
    lo, hi = float(np.min(d - radius)), float(np.max(d + radius))
    pad = 1e-12 * max(abs(lo), abs(hi), 1.0)
    lam = kernels.bisect_lowest(d, e, k, lo - pad, hi + pad, 200)
    vecs = np.empty((k, n))
    rng = np.random.default_rng(12345)  # fixed start vector keeps output deterministic
    start = rng.standard_normal(n)
    for j in range(k):
        # perturb the shift off the exact eigenvalue so the solve stays regular
        shift = lam[j] + 1e-14 * max(abs(lam[j]), 1.0)
        v = kernels.inverse_iteration(d, e, shift, start, INVERSE_ITERATIONS)
        # re-orthogonalize against close eigenvalues
        for i in range(j):
            if abs(lam[j] - lam[i]) < 1e-8 * max(abs(lam[j]), 1.0):
                v -= (vecs[i] @ v) * vecs[i]
        vecs[j] = v / np.linalg.norm(v)
    return lam, vecs


def _ql_path(d, e, k):
    n = d.size
    dd = d.copy()
    ee = np.zeros(n)
    ee[: n - 1] = e
    z = np.eye(n)
    fail = kernels.ql_implicit(dd, ee, z, True, QL_MAX_ITER)
    if fail >= 0:
        raise EigenError("implicit QL did not converge", fail)
    order = np.argsort(dd, kind="stable")[:k]
    return dd[order], z[:, order].T.copy()


def eigen_symmetric_tridiagonal(H: GridOperator, k: int) -> Spectrum:
    """Lowest k eigenpairs of a symmetric tridiagonal operator.

    Bisection + inverse iteration for k well below n, implicit QL otherwise.
    """
    if not isinstance(H, GridOperator):
        raise OperatorError("expected a GridOperator")
    d, e = H.trimmed().tridiagonal() if H.band > 1 else H.tridiagonal()
    n = d.size
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if n > 64 and k <= n // 4:
        lam, vecs = _bisection_path(d, e, k)
    else:
        lam, vecs = _ql_path(d, e, k)
    vecs = vecs / math.sqrt(H.grid.h)
    _fix_signs(vecs)
    return Spectrum(np.asarray(lam, dtype=float), vecs, H.grid)


# ------------------------------------------------------- analytic states


def analytic_energy(n: int, omega: float) -> float:
    return omega * (n + 0.5)


def hermite(n: int, y):
    """Physicists' Hermite polynomial H_n(y)."""
    y = np.asarray(y, dtype=float)
    h_prev = np.ones_like(y)
    if n == 0:
        return h_prev if y.ndim else float(h_prev)
    h = 2.0 * y
    for k in range(1, n):
        h_prev, h = h, 2.0 * y * h - 2.0 * k * h_prev
    return h if y.ndim else float(h)


def analytic_Psi(n: int, omega: float, q):
    """(w/pi)^(1/4) (2^n n!)^(-1/2) H_n(sqrt(w) q) exp(-w q^2 / 2).

    Uses the recurrence for the normalized functions, which stays finite for
    large n where H_n and the prefactor separately overflow.
    """
    q = np.asarray(q, dtype=float)
    y = math.sqrt(omega) * q
    with np.errstate(under="ignore"):
        psi_prev = (omega / math.pi) ** 0.25 * np.exp(-0.5 * y * y)
    if n == 0:
        out = psi_prev
    else:
        psi = math.sqrt(2.0) * y * psi_prev
        for k in range(1, n):
            psi_prev, psi = psi, math.sqrt(2.0 / (k + 1)) * y * psi - math.sqrt(k / (k + 1)) * psi_prev
        out = psi
    return out if q.ndim else float(out)


def analytic_phi(n: int, omega: float, p: MassProfile, cmap: CoordinateMap, x):
    """m(x)^(1/4) Psi_n(q(x))."""
    x = np.asarray(x, dtype=float)
    out = np.asarray(p.m(x), dtype=float) ** 0.25 * analytic_Psi(n, omega, cmap.forward(x))
    return out if x.ndim else float(out)


@dataclass(frozen=True)
class AnalyticState:
    n: int
    omega: float

    @property
    def normalization(self):
        return (self.omega / math.pi) ** 0.25 / math.sqrt(2.0 ** self.n * math.factorial(self.n))

    @property
    def energy(self):
        return analytic_energy(self.n, self.omega)

    def Psi(self, q):
        return analytic_Psi(self.n, self.omega, q)

    def phi(self, p, cmap, x):
        return analytic_phi(self.n, self.omega, p, cmap, x)


def overlap(u, v, h):
    """|<u, v>| / (|u| |v|) with quadrature weight h."""
    return abs(float(u @ v)) / math.sqrt(float(u @ u) * float(v @ v))


def ladder_matrix_element(n: int, direction: str, p: MassProfile, cmap: CoordinateMap,
                          cfg: OscillatorConfig, which: str = "B", grid: Grid | None = None) -> float:
    """<target | Op | source> by quadrature on the grid.

    For B the states are Psi_k(q(x)) with weight dq = sqrt(m) dx; for A they
    are phi_k(x) with weight dx. Lowering the ground state has no target, so
    the norm of Op|0> is returned instead.
    """
    if direction not in ("raise", "lower"):
        raise ValueError(f"direction must be 'raise' or 'lower', got {direction!r}")
    if which not in ("A", "B"):
        raise ValueError(f"which must be 'A' or 'B', got {which!r}")
    g = grid if grid is not None else cfg.grid()
    x = g.points
    q = cmap.forward(x)
    q_lo, q_hi = q[0], q[-1]
    width = 1.0 / math.sqrt(cfg.omega)
    reach = math.sqrt(2.0 * (n + 1) + 1.0) * width
    if min(-q_lo, q_hi) < reach + 8.0 * width:
        raise ValueError(
            f"q-range [{q_lo:.6g}, {q_hi:.6g}] of the grid is too small to hold state {n + 1}"
        )
    dagger = direction == "raise"
    if which == "B":
        op = ladder_B(p, g, cmap, cfg, dagger, q=q)
        weight = np.sqrt(p.m(x)) * g.h
        states = lambda k: analytic_Psi(k, cfg.omega, q)
    else:
        op = ladder_A(p, g, cmap, cfg, dagger, q=q)
        weight = np.full(g.n, g.h)
        states = lambda k: analytic_phi(k, cfg.omega, p, cmap, x)
    image = op @ states(n)
    if direction == "lower" and n == 0:
        return math.sqrt(float(np.sum(weight * image * image)))
    target = states(n + 1 if dagger else n - 1)
    return float(np.sum(weight * target * image))
