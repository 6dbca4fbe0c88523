"""Uniform grids and the coordinate map q(x) = int sqrt(m(x)) dx.

The map is tabulated on a breakpoint table by adaptive Simpson quadrature
(absolute tolerance per panel), and evaluated anywhere by adding one more
adaptive integral from the nearest breakpoint. The adaptive integrator works
level by level on arrays of panels, so a whole grid is mapped in a handful
of vectorized integrand calls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import ExprError
from .profiles import MassProfile, ProfileError, default_anchor

PANEL_TOL = 1e-10
N_BREAKPOINTS = 1024
DEFAULT_HALF_SPAN = 50.0
ENDPOINT_GAP = 1e-6
MAX_DEPTH = 60
MAX_LIVE_PANELS = 2_000_000
_EPS = np.finfo(float).eps


class QuadratureError(RuntimeError):
    def __init__(self, message, interval):
        super().__init__(f"{message} on [{interval[0]!r}, {interval[1]!r}]")
        self.interval = interval


class CoordinateRangeError(ValueError):
    pass


# ------------------------------------------------------------------- grids


@dataclass(frozen=True, eq=False)
class Grid:
    points: np.ndarray
    h: float
    label: str = "x"

    def __post_init__(self):
        pts = self.points
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least two points")
        steps = np.diff(pts)
        if not np.all(steps > 0):
            raise ValueError("grid points must be strictly increasing")
        if np.max(np.abs(steps - self.h)) > 1e-12 * max(abs(self.h), 1.0) * max(1.0, np.max(np.abs(pts))):
            raise ValueError("grid is not uniform")

    @classmethod
    def uniform(cls, lo, hi, n, label="x"):
        if not lo < hi:
            raise ValueError(f"need lo < hi, got {lo}, {hi}")
        n = int(n)
        if n < 2:
            raise ValueError("n must be at least 2")
        pts = np.linspace(lo, hi, n)
        return cls(pts, (hi - lo) / (n - 1), label)

    @property
    def n(self):
        return self.points.size

    @property
    def bounds(self):
        return float(self.points[0]), float(self.points[-1])

    def __len__(self):
        return self.points.size


# -------------------------------------------------------------- quadrature


def adaptive_simpson(f, a, b, tol=PANEL_TOL, max_depth=MAX_DEPTH):
    """Integrals of ``f`` over the panels [a_i, b_i], each to absolute ``tol``.

    ``a`` and ``b`` may be arrays; every panel is refined independently but
    integrand calls are batched across all live panels at each level.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape
    a, b = a.ravel().copy(), b.ravel().copy()
    total = np.zeros(a.size)

    owner = np.arange(a.size)
    m = 0.5 * (a + b)
    fvals = np.asarray(f(np.concatenate([a, m, b])), dtype=float)
    fa, fm, fb = np.split(fvals, 3)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    tols = np.full(a.size, float(tol))

    for _depth in range(max_depth):
        if owner.size == 0:
            break
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        fvals = np.asarray(f(np.concatenate([lm, rm])), dtype=float)
        flm, frm = np.split(fvals, 2)
        left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
        right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
        delta = left + right - whole
        if not np.all(np.isfinite(delta)):
            i = int(np.flatnonzero(~np.isfinite(delta))[0])
            raise QuadratureError("integrand is not finite", (a[i], b[i]))
        # floor at rounding level so steep integrands can still converge
        done = np.abs(delta) <= 15.0 * np.maximum(tols, 64.0 * _EPS * np.abs(left + right))
        np.add.at(total, owner[done], left[done] + right[done] + delta[done] / 15.0)
        keep = ~done
        if not keep.any():
            owner = owner[:0]
            break
        owner = np.concatenate([owner[keep], owner[keep]])
        a, b = np.concatenate([a[keep], m[keep]]), np.concatenate([m[keep], b[keep]])
        fa, fb = np.concatenate([fa[keep], fm[keep]]), np.concatenate([fm[keep], fb[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        tols = np.concatenate([tols[keep], tols[keep]]) * 0.5
        m = 0.5 * (a + b)
        if owner.size > MAX_LIVE_PANELS:
            raise QuadratureError("adaptive Simpson needs too many panels", (a[0], b[-1]))
    if owner.size:
        i = int(np.argmax(b - a))
        raise QuadratureError("adaptive Simpson did not converge", (a[i], b[i]))
    return total.reshape(shape)


# ---------------------------------------------------------- coordinate map


class CoordinateMap:
    """Increasing map x -> q with q(x0) = q0 and dq/dx = sqrt(m(x))."""

    def __init__(self, profile: MassProfile, x0: float, q0: float, span, tol=PANEL_TOL,
                 n_breakpoints=N_BREAKPOINTS):
        self.profile = profile
        self.x0 = float(x0)
        self.q0 = float(q0)
        self.tol = tol
        lo, hi = span
        lo, hi = min(lo, self.x0), max(hi, self.x0)
        edges = np.linspace(lo, hi, n_breakpoints)
        edges = np.union1d(edges, [self.x0])
        k0 = int(np.searchsorted(edges, self.x0))
        pieces = adaptive_simpson(self._integrand, edges[:-1], edges[1:], tol)
        table = np.empty(edges.size)
        table[k0] = self.q0
        table[k0 + 1:] = self.q0 + np.cumsum(pieces[k0:])
        table[:k0] = self.q0 - np.cumsum(pieces[:k0][::-1])[::-1]
        self.breakpoints = edges
        self.table = table
        self._range = None

    # integrand guarded against leaving the domain
    def _integrand(self, x):
        try:
            with np.errstate(all="ignore"):
                return self.profile.sqrt_m(x)
        except ExprError as exc:
            raise QuadratureError(f"mass profile failed: {exc}", (float(np.min(x)), float(np.max(x))))

    @property
    def span(self):
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def dq_dx(self, x):
        return self.profile.sqrt_m(x)

    def _check_domain(self, x):
        lo, hi = self.profile.domain
        bad = (x < lo) | (x > hi) | ((x == lo) & np.isfinite(lo)) | ((x == hi) & np.isfinite(hi))
        if np.any(bad):
            raise CoordinateRangeError(
                f"x={float(np.asarray(x)[bad][0])!r} is outside the domain {self.profile.domain}"
            )

    def forward(self, x):
        """q(x), vectorized."""
        xa = np.asarray(x, dtype=float)
        flat = np.atleast_1d(xa).ravel()
        self._check_domain(flat)
        bp, table = self.breakpoints, self.table
        k = np.clip(np.searchsorted(bp, flat) - 1, 0, bp.size - 1)
        # nearest breakpoint as the starting node
        k = np.where((k + 1 < bp.size) & (np.abs(bp[np.minimum(k + 1, bp.size - 1)] - flat) < np.abs(bp[k] - flat)), k + 1, k)
        start = bp[k]
        out = table[k] + adaptive_simpson(self._integrand, start, flat, self.tol)
        return float(out[0]) if xa.ndim == 0 else out.reshape(xa.shape)

    __call__ = forward

    # ------------------------------------------------------------- ranges

    def _end_behaviour(self, side):
        """(bounded, q_end) for the domain end on ``side`` (-1 or +1)."""
        lo, hi = self.profile.domain
        edge = lo if side < 0 else hi
        sqrt_m = self.profile.sqrt_m

        def probe(xs):
            try:
                with np.errstate(all="ignore"):
                    v = np.asarray(sqrt_m(np.asarray(xs, dtype=float)), dtype=float)
            except (ExprError, ProfileError, FloatingPointError):
                return np.array([math.inf, math.inf])
            return v

        if math.isfinite(edge):
            d1, d2 = 1e-5, ENDPOINT_GAP
            s1, s2 = probe([edge - side * d1, edge - side * d2])
            if not np.all(np.isfinite([s1, s2])):
                return False, side * math.inf
            if s1 > 0 and s2 > 0:
                p = math.log(s2 / s1) / math.log(d2 / d1)
                if p <= -0.99:
                    return False, side * math.inf
            else:
                p = 0.0
            x_near = edge - side * d2
            q_near = float(self.forward(x_near))
            tail = s2 * d2 / (p + 1.0) if p > -0.99 else 0.0
            return True, q_near + side * tail
        far1 = self.x0 + side * 1e3
        far2 = self.x0 + side * 1e4
        s1, s2 = probe([far1, far2])
        if not np.all(np.isfinite([s1, s2])):
            return False, side * math.inf
        if s2 == 0.0:
            p = -math.inf
        elif s1 == 0.0:
            p = 0.0
        else:
            p = math.log(s2 / s1) / math.log(abs(far2) / abs(far1))
        if p >= -1.01:
            return False, side * math.inf
        q_far = float(self.forward(far2))
        tail = s2 * abs(far2) / (-p - 1.0) if np.isfinite(p) and s2 > 0 else 0.0
        return True, q_far + side * tail

    def q_range(self):
        """Estimated attainable q-range over the whole domain (inf if unbounded)."""
        if self._range is None:
            self._range = (self._end_behaviour(-1)[1], self._end_behaviour(+1)[1])
        return self._range

    @property
    def onto_real(self):
        lo, hi = self.q_range()
        return math.isinf(lo) and math.isinf(hi)

    # ------------------------------------------------------------ inverse

    def invert(self, q, tol=1e-10):
        """x with |q(x) - q| <= tol (vectorized).

        Bisection on the breakpoint bracket, then safeguarded Newton steps
        using dq/dx = sqrt(m).
        """
        qa = np.asarray(q, dtype=float)
        flat = np.atleast_1d(qa).ravel()
        q_lo, q_hi = self.q_range()
        out_of_range = (flat <= q_lo) | (flat >= q_hi)
        if np.any(out_of_range):
            bad = float(flat[out_of_range][0])
            raise CoordinateRangeError(
                f"q={bad!r} is outside the attainable range ({q_lo:.12g}, {q_hi:.12g})"
            )
        a = np.empty_like(flat)
        b = np.empty_like(flat)
        bp, table = self.breakpoints, self.table
        inside = (flat >= table[0]) & (flat <= table[-1])
        k = np.clip(np.searchsorted(table, flat[inside]) - 1, 0, table.size - 2)
        a[inside], b[inside] = bp[k], bp[k + 1]
        for i in np.flatnonzero(~inside):
            a[i], b[i] = self._expand_bracket(flat[i])
        for _ in range(12):
            mid = 0.5 * (a + b)
            below = self.forward(mid) < flat
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        x = 0.5 * (a + b)
        for _ in range(30):
            resid = self.forward(x) - flat
            step = resid / self.dq_dx(x)
            # keep polishing where the map is flat: a small q residual can hide an x error
            settled = (np.abs(step) <= 1e-12 * np.maximum(1.0, np.abs(x))) | (
                np.abs(resid) <= 8 * _EPS * np.maximum(1.0, np.abs(flat)))
            if np.all((np.abs(resid) <= tol) & settled):
                break
            cand = x - step
            # Newton step only while it stays inside the bracket
            a = np.where(resid < 0, x, a)
            b = np.where(resid > 0, x, b)
            ok = (cand > a) & (cand < b)
            x = np.where(ok, cand, 0.5 * (a + b))
        else:
            resid = self.forward(x) - flat
            if np.any(np.abs(resid) > tol):
                raise CoordinateRangeError("inversion did not reach the requested tolerance")
        return float(x[0]) if qa.ndim == 0 else x.reshape(qa.shape)

    def _expand_bracket(self, q):
        lo, hi = self.profile.domain
        side = 1 if q > self.table[-1] else -1
        start = self.breakpoints[-1] if side > 0 else self.breakpoints[0]
        edge = hi if side > 0 else lo
        step = max(1.0, abs(start - self.x0))
        x_prev = start
        for _ in range(200):
            if math.isfinite(edge):
                x_new = x_prev + 0.5 * (edge - x_prev)
            else:
                x_new = x_prev + side * step
                step *= 2.0
            if side * (self.forward(x_new) - q) >= 0:
                return (x_prev, x_new) if side > 0 else (x_new, x_prev)
            x_prev = x_new
        raise CoordinateRangeError(f"could not bracket q={q!r}")


def build_map(p: MassProfile, x0: float | None = None, q0: float = 0.0, span=None,
              tol: float = PANEL_TOL, n_breakpoints: int = N_BREAKPOINTS) -> CoordinateMap:
    """Tabulate q(x) = q0 + int_{x0}^x sqrt(m) over ``span`` (default: x0 +/- 50)."""
    if x0 is None:
        x0, q0 = default_anchor(p, bounds=span)
    lo, hi = p.domain
    if not (lo < x0 < hi):
        raise ProfileError(f"anchor x0={x0} is not inside the domain {p.domain}")
    if span is None:
        span = (x0 - DEFAULT_HALF_SPAN, x0 + DEFAULT_HALF_SPAN)
    a, b = span
    # keep the table off singular endpoints
    if math.isfinite(lo):
        a = max(a, lo + ENDPOINT_GAP * max(1.0, abs(lo)))
    if math.isfinite(hi):
        b = min(b, hi - ENDPOINT_GAP * max(1.0, abs(hi)))
    return CoordinateMap(p, x0, q0, (a, b), tol, n_breakpoints)


def build_map_for(mass, deform=None, closed=None, bounds=None, **kwargs) -> CoordinateMap:
    """Map anchored by :func:`profiles.default_anchor`, tabulated over ``bounds``."""
    x0, q0 = default_anchor(mass, deform, closed, bounds)
    return build_map(mass, x0, q0, span=bounds, **kwargs)


def invert(cmap: CoordinateMap, q):
    return cmap.invert(q)
