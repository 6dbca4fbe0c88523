"""Banded real grid operators for the PDM momentum, kinetic terms, Hamiltonians
and ladder operators.

Every operator acts on grid functions with Dirichlet ends (values outside the
grid are zero). ``p = -i pi`` is never formed: all identities are checked in
their real form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coord import CoordinateMap, Grid
from .profiles import MassProfile, Potential


class OperatorError(ValueError):
    pass


class GridOperator:
    """Real banded matrix on a grid.

    ``data[band + k, i]`` holds the entry (i, i + k); slots that would fall
    outside the matrix are kept at zero.
    """

    __slots__ = ("grid", "band", "data", "symmetric")

    def __init__(self, grid: Grid, data, band: int, symmetric: bool = False):
        data = np.ascontiguousarray(data, dtype=float)
        if data.shape != (2 * band + 1, grid.n):
            raise OperatorError(f"banded storage has shape {data.shape}, expected {(2 * band + 1, grid.n)}")
        self.grid = grid
        self.band = int(band)
        self.data = data
        self.symmetric = bool(symmetric)
        if symmetric and not self.is_symmetric():
            raise OperatorError("operator flagged symmetric but is not")

    # ------------------------------------------------------- constructors

    @classmethod
    def diagonal(cls, grid, values):
        values = np.broadcast_to(np.asarray(values, dtype=float), (grid.n,))
        return cls(grid, values[None, :].copy(), 0, symmetric=True)

    @classmethod
    def identity(cls, grid):
        return cls.diagonal(grid, 1.0)

    @classmethod
    def central_difference(cls, grid):
        n, h = grid.n, grid.h
        data = np.zeros((3, n))
        data[2, :-1] = 0.5 / h
        data[0, 1:] = -0.5 / h
        return cls(grid, data, 1)

    @classmethod
    def from_dense(cls, grid, matrix, band=None):
        matrix = np.asarray(matrix, dtype=float)
        n = grid.n
        if band is None:
            rows, cols = np.nonzero(matrix)
            band = int(np.max(np.abs(cols - rows))) if rows.size else 0
        data = np.zeros((2 * band + 1, n))
        for k in range(-band, band + 1):
            diag = np.diagonal(matrix, k)
            if k >= 0:
                data[band + k, : n - k] = diag
            else:
                data[band + k, -k:] = diag
        return cls(grid, data, band)

    # ------------------------------------------------------------ queries

    @property
    def n(self):
        return self.grid.n

    @property
    def shape(self):
        return (self.grid.n, self.grid.n)

    def band_values(self, k):
        """Entries (i, i + k) for all valid i."""
        if abs(k) >= self.n:
            return np.zeros(0)
        if abs(k) > self.band:
            return np.zeros(self.n - abs(k))
        row = self.data[self.band + k]
        return row[: self.n - k] if k >= 0 else row[-k:]

    def to_dense(self):
        n = self.n
        out = np.zeros((n, n))
        for k in range(-self.band, self.band + 1):
            vals = self.band_values(k)
            idx = np.arange(vals.size)
            if k >= 0:
                out[idx, idx + k] = vals
            else:
                out[idx - k, idx] = vals
        return out

    def transpose(self):
        b, n = self.band, self.n
        data = np.zeros_like(self.data)
        for k in range(-b, b + 1):
            # (i, i+k) of the transpose is (i+k, i) of self
            vals = self.band_values(-k)
            if k >= 0:
                data[b + k, : n - k] = vals
            else:
                data[b + k, -k:] = vals
        return GridOperator(self.grid, data, b, self.symmetric)

    T = property(transpose)

    def is_symmetric(self, rtol=1e-12):
        scale = max(float(np.max(np.abs(self.data))), 1e-300)
        for k in range(1, self.band + 1):
            if np.max(np.abs(self.band_values(k) - self.band_values(-k)), initial=0.0) > rtol * scale:
                return False
        return True

    def tridiagonal(self):
        """(diagonal, off-diagonal) of a symmetric band-1 operator."""
        if self.band > 1 and np.any(self.data[: self.band - 1]) | np.any(self.data[self.band + 2 :]):
            raise OperatorError("operator is not tridiagonal")
        if not self.is_symmetric():
            raise OperatorError("operator is not symmetric")
        return self.band_values(0).copy(), self.band_values(1).copy()

    # --------------------------------------------------------- arithmetic

    def _check_grid(self, other):
        if other.grid is not self.grid:
            g1, g2 = self.grid, other.grid
            if g1.n != g2.n or not np.array_equal(g1.points, g2.points):
                raise OperatorError("operators live on different grids")

    def widened(self, band):
        if band < self.band:
            raise OperatorError("cannot narrow a band by widening")
        if band == self.band:
            return self
        pad = band - self.band
        data = np.zeros((2 * band + 1, self.n))
        data[pad : pad + 2 * self.band + 1] = self.data
        return GridOperator(self.grid, data, band, self.symmetric)

    def trimmed(self):
        """Drop outer bands that are identically zero."""
        b = self.band
        while b > 0 and not np.any(self.data[self.band - b]) and not np.any(self.data[self.band + b]):
            b -= 1
        if b == self.band:
            return self
        cut = self.band - b
        return GridOperator(self.grid, self.data[cut : cut + 2 * b + 1].copy(), b, self.symmetric)

    def __add__(self, other):
        if not isinstance(other, GridOperator):
            return NotImplemented
        self._check_grid(other)
        band = max(self.band, other.band)
        data = self.widened(band).data + other.widened(band).data
        return GridOperator(self.grid, data, band, self.symmetric and other.symmetric)

    def __neg__(self):
        return GridOperator(self.grid, -self.data, self.band, self.symmetric)

    def __sub__(self, other):
        if not isinstance(other, GridOperator):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, GridOperator):
            return NotImplemented
        return GridOperator(self.grid, self.data * float(scalar), self.band, self.symmetric)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, GridOperator):
            return compose(self, other)
        return apply(self, other)

    def scale_left(self, d):
        """diag(d) @ self."""
        d = np.broadcast_to(np.asarray(d, dtype=float), (self.n,))
        return GridOperator(self.grid, self.data * d[None, :], self.band)

    def scale_right(self, d):
        """self @ diag(d)."""
        d = np.broadcast_to(np.asarray(d, dtype=float), (self.n,))
        data = np.zeros_like(self.data)
        n = self.n
        for k in range(-self.band, self.band + 1):
            row = self.data[self.band + k]
            if k >= 0:
                data[self.band + k, : n - k] = row[: n - k] * d[k:]
            else:
                data[self.band + k, -k:] = row[-k:] * d[: n + k]
        return GridOperator(self.grid, data, self.band)

    def row_sums(self):
        return self.data.sum(axis=0)

    def __repr__(self):
        return f"GridOperator(n={self.n}, band={self.band}, symmetric={self.symmetric})"


def compose(a: GridOperator, b: GridOperator) -> GridOperator:
    """Exact banded product a @ b."""
    a._check_grid(b)
    data = kernels.banded_matmul(a.data, a.band, b.data, b.band)
    return GridOperator(a.grid, data, a.band + b.band)


def commutator(a: GridOperator, b: GridOperator) -> GridOperator:
    return compose(a, b) - compose(b, a)


def apply(a: GridOperator, v) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != (a.n,):
        raise OperatorError(f"vector of shape {v.shape} does not match grid of {a.n} points")
    return kernels.banded_matvec(a.data, a.band, v)


# ---------------------------------------------------------------- configs


@dataclass(frozen=True)
class OrderingParams:
    """Exponents in T = -1/2 m^a d/dx m^(2b) d/dx m^a, with a + b = -1/2."""

    a: float = -0.25
    b: float = -0.25

    def __post_init__(self):
        if abs(self.a + self.b + 0.5) > 1e-12:
            raise OperatorError(f"ordering needs a + b = -1/2, got a={self.a}, b={self.b}")

    @classmethod
    def from_a(cls, a):
        return cls(float(a), -0.5 - float(a))


@dataclass(frozen=True)
class OscillatorConfig:
    omega: float = 1.0
    bounds: tuple[float, float] = (-20.0, 20.0)
    n: int = 4000
    ordering: OrderingParams = field(default_factory=OrderingParams)

    def __post_init__(self):
        if not self.omega > 0:
            raise OperatorError(f"omega must be positive, got {self.omega}")
        if self.n < 16:
            raise OperatorError(f"need at least 16 grid points, got {self.n}")
        if not self.bounds[0] < self.bounds[1]:
            raise OperatorError(f"bad bounds {self.bounds}")

    def grid(self, n=None, label="x"):
        return Grid.uniform(self.bounds[0], self.bounds[1], n or self.n, label)


# -------------------------------------------------------------- assembly


def _in_domain(p: MassProfile, g: Grid, pad=0.0):
    lo, hi = p.domain
    a, b = g.points[0] - pad, g.points[-1] + pad
    if not (lo < a and b < hi):
        raise OperatorError(f"grid [{a:.6g}, {b:.6g}] leaves the domain {p.domain}")


def _mass(p, g):
    _in_domain(p, g)
    return np.asarray(p.m(g.points), dtype=float)


def _potential_values(V, x):
    if V is None:
        return np.zeros_like(x)
    if callable(V):
        return np.asarray(V(x), dtype=float) * np.ones_like(x)
    return np.broadcast_to(np.asarray(V, dtype=float), x.shape)


def momentum_pi(p: MassProfile, g: Grid) -> GridOperator:
    """pi = d/dx - m'/(4m)."""
    m = _mass(p, g)
    shift = -np.asarray(p.m_prime(g.points), dtype=float) / (4.0 * m)
    return GridOperator.central_difference(g) + GridOperator.diagonal(g, shift).widened(1)


def kinetic_vonroos(p: MassProfile, g: Grid, ordering: OrderingParams = OrderingParams()) -> GridOperator:
    """-1/2 m^a d/dx m^(2b) d/dx m^a on the 3-point stencil, weights at midpoints."""
    h = g.h
    _in_domain(p, g, pad=0.5 * h)
    x = g.points
    f = np.asarray(p.m(x), dtype=float) ** ordering.a
    mid = np.concatenate([[x[0] - 0.5 * h], 0.5 * (x[1:] + x[:-1]), [x[-1] + 0.5 * h]])
    w = np.asarray(p.m(mid), dtype=float) ** (2.0 * ordering.b)
    scale = 0.5 / (h * h)
    data = np.zeros((3, g.n))
    data[1] = scale * f * f * (w[:-1] + w[1:])
    off = -scale * f[:-1] * w[1:-1] * f[1:]
    data[2, :-1] = off
    data[0, 1:] = off
    return GridOperator(g, data, 1, symmetric=True)


def kinetic_T1(p: MassProfile, g: Grid) -> GridOperator:
    return kinetic_vonroos(p, g, OrderingParams(-0.25, -0.25))


def laplacian(g: Grid) -> GridOperator:
    """-1/2 d^2 with Dirichlet ends."""
    s = 0.5 / (g.h * g.h)
    data = np.zeros((3, g.n))
    data[1] = 2.0 * s
    data[2, :-1] = -s
    data[0, 1:] = -s
    return GridOperator(g, data, 1, symmetric=True)


def hamiltonian_H1(p: MassProfile, g: Grid, cfg: OscillatorConfig, V) -> GridOperator:
    """T1 + V."""
    return kinetic_T1(p, g) + GridOperator.diagonal(g, _potential_values(V, g.points)).widened(1)


def hamiltonian_vonroos(p: MassProfile, g: Grid, cfg: OscillatorConfig, V) -> GridOperator:
    """Kinetic term in the configured ordering plus V."""
    T = kinetic_vonroos(p, g, cfg.ordering)
    return T + GridOperator.diagonal(g, _potential_values(V, g.points)).widened(1)


def hamiltonian_H2_on_q(cfg: OscillatorConfig, V_of_q, gq: Grid, q_range=None) -> GridOperator:
    """-1/2 d^2/dq^2 + V(q) on a q-grid."""
    if q_range is not None:
        lo, hi = q_range
        if not (lo < gq.points[0] and gq.points[-1] < hi):
            raise OperatorError(
                f"q-grid [{gq.points[0]:.6g}, {gq.points[-1]:.6g}] exceeds the attainable range ({lo:.6g}, {hi:.6g})"
            )
    return laplacian(gq) + GridOperator.diagonal(gq, _potential_values(V_of_q, gq.points)).widened(1)


def hamiltonian_H2_on_x(p: MassProfile, g: Grid, cfg: OscillatorConfig, V) -> GridOperator:
    """-1/2 m^(-1/2) d/dx m^(-1/2) d/dx + V, composed from first-order factors."""
    m = _mass(p, g)
    GD = GridOperator.central_difference(g).scale_left(m ** -0.5)
    T = compose(GD, GD) * -0.5
    return T + GridOperator.diagonal(g, _potential_values(V, g.points)).widened(2)


def _ladder_constants(omega):
    return 1.0 / math.sqrt(2.0 * omega), math.sqrt(0.5 * omega)


def ladder_A(p: MassProfile, g: Grid, cmap: CoordinateMap, cfg: OscillatorConfig,
             dagger: bool = False, q=None) -> GridOperator:
    """A = c m^b D m^a + s q,  A^dagger = -c m^a D m^b + s q  (c = 1/sqrt(2w), s = sqrt(w/2)).

    With the default ordering a = b = -1/4 both derivative parts are
    m^(-1/4) D m^(-1/4).
    """
    m = _mass(p, g)
    c, s = _ladder_constants(cfg.omega)
    a, b = cfg.ordering.a, cfg.ordering.b
    left, right = (m ** a, m ** b) if dagger else (m ** b, m ** a)
    deriv = GridOperator.central_difference(g).scale_left(left).scale_right(right)
    qv = cmap.forward(g.points) if q is None else q
    sign = -c if dagger else c
    return deriv * sign + GridOperator.diagonal(g, s * qv).widened(1)


def ladder_B(p: MassProfile, g: Grid, cmap: CoordinateMap, cfg: OscillatorConfig,
             dagger: bool = False, q=None) -> GridOperator:
    """B = c m^(-1/2) D + s q,  B^dagger = -c m^(-1/2) D + s q."""
    m = _mass(p, g)
    c, s = _ladder_constants(cfg.omega)
    deriv = GridOperator.central_difference(g).scale_left(m ** -0.5)
    qv = cmap.forward(g.points) if q is None else q
    sign = -c if dagger else c
    return deriv * sign + GridOperator.diagonal(g, s * qv).widened(1)


def noether_momentum(p: MassProfile, g: Grid) -> GridOperator:
    """(2m)^(-1/2) d/dx."""
    m = _mass(p, g)
    return GridOperator.central_difference(g).scale_left((2.0 * m) ** -0.5)


def position(g: Grid) -> GridOperator:
    return GridOperator.diagonal(g, g.points)


def oscillator_potential(cmap: CoordinateMap, omega: float) -> Potential:
    """V(x) = w^2 q(x)^2 / 2 with V' = w^2 q sqrt(m)."""
    w2 = omega * omega

    def V(x):
        return 0.5 * w2 * cmap.forward(x) ** 2

    def V_prime(x):
        return w2 * cmap.forward(x) * cmap.dq_dx(x)

    return Potential(V, V_prime)
