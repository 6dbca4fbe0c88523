"""Mass profiles m(x), deformation functions Q(x) and the built-in examples.

A mass profile and a deformation are tied by

    sqrt(m) = sqrt(Q) * (1 + x Q'/(2Q)),      q(x) = sqrt(Q) x = int sqrt(m) dx,

and the deformed oscillator potential is V = omega^2 Q x^2 / 2.

Built-ins are declared as expression strings so first and second derivatives
come from dual arithmetic. Where a printed closed form q(x) decreases
(q' = -sqrt(m)) the built-in records ``orientation = -1``; the coordinate
map itself is always the increasing branch, ``orientation * q_closed``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .expr import Compiled

Func = Callable[[np.ndarray], np.ndarray]

VALIDATION_SAMPLES = 512
_WINDOW = 100.0  # sampling window used for infinite domain ends

BUILTINS = (
    "constant",
    "rational_cubic",
    "singular_cubic",
    "power_law",
    "asinh_log",
    "log_ratio",
    "morse",
    "yukawa",
)

DEFAULT_PARAMS = {
    "constant": {},
    "rational_cubic": {"lambda": 1.0},
    "singular_cubic": {"lambda": 1.0},
    "power_law": {"lambda": 1.0, "sigma": 2.0},
    "asinh_log": {"alpha": 1.0, "offset": 0.0},
    "log_ratio": {"alpha": 1.0, "offset": 0.0},
    "morse": {"lambda": 1.0, "beta": 1.0},
    "yukawa": {"V0": -1.0, "delta": 1.0},
}


class ProfileError(ValueError):
    pass


class PositivityError(ProfileError):
    """m(x) or Q(x) is not positive where it must be."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


def sample_points(domain, n=VALIDATION_SAMPLES):
    """``n`` evenly spaced points strictly inside ``domain``."""
    lo, hi = domain
    if math.isinf(lo) and math.isinf(hi):
        lo, hi = -_WINDOW, _WINDOW
    elif math.isinf(lo):
        lo = hi - _WINDOW
    elif math.isinf(hi):
        hi = lo + _WINDOW
    return np.linspace(lo, hi, n + 2)[1:-1]


def _positive(f, domain, what):
    xs = sample_points(domain)
    with np.errstate(all="ignore"):
        vals = np.asarray(f(xs), dtype=float)
    bad = ~(vals > 0.0) | ~np.isfinite(vals)
    if bad.all():
        raise PositivityError(f"{what} is not positive anywhere on {domain}")
    if bad.any():
        x_bad = float(xs[np.argmax(bad)])
        raise PositivityError(f"{what} is not positive at x={x_bad!r} inside {domain}", x_bad)


@dataclass(frozen=True, eq=False)
class MassProfile:
    """Dimensionless mass m(x) > 0 on the open interval ``domain``."""

    m: Func
    m_prime: Func
    domain: tuple[float, float] = (-math.inf, math.inf)
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)
    validate: bool = True

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise ProfileError(f"empty domain {self.domain}")
        if self.validate:
            _positive(self.m, self.domain, "m(x)")

    @classmethod
    def from_expression(cls, text, params=None, domain=(-math.inf, math.inf), name=None):
        f = Compiled(text, params)
        return cls(f, f.prime, tuple(domain), name or text, dict(params or {}))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        return (x >= lo) & (x <= hi)

    def sqrt_m(self, x):
        return np.sqrt(self.m(x))


@dataclass(frozen=True, eq=False)
class DeformationProfile:
    """Deformation Q(x) > 0 multiplying the oscillator potential.

    ``orientation`` is the sign of 1 + x Q'/(2Q) on the domain (detected from
    samples when left at 0), so that the increasing coordinate is
    ``orientation * sqrt(Q) * x``.
    """

    Q: Func
    Q_prime: Func
    domain: tuple[float, float] = (-math.inf, math.inf)
    Q_second: Func | None = None
    orientation: int = 0
    name: str = "custom"
    validate: bool = True

    def __post_init__(self):
        if self.validate:
            _positive(self.Q, self.domain, "Q(x)")
        if self.orientation == 0:
            with np.errstate(all="ignore"):
                sign = _bracket_sign(self, sample_points(self.domain))
            object.__setattr__(self, "orientation", sign)

    @classmethod
    def from_expression(cls, text, params=None, domain=(-math.inf, math.inf), name=None):
        f = Compiled(text, params)
        return cls(f, f.prime, tuple(domain), f.second, 0, name or text)

    def bracket(self, x):
        """1 + x Q'(x) / (2 Q(x))."""
        x = np.asarray(x, dtype=float)
        return 1.0 + x * self.Q_prime(x) / (2.0 * self.Q(x))

    def coordinate(self, x):
        """The increasing coordinate ``orientation * sqrt(Q) x``."""
        x = np.asarray(x, dtype=float)
        return self.orientation * np.sqrt(self.Q(x)) * x


def _bracket_sign(d, xs):
    b = d.bracket(xs)
    b = b[np.isfinite(b) & (b != 0.0)]
    if b.size == 0:
        return 1
    return 1 if np.sum(b > 0) >= np.sum(b < 0) else -1


@dataclass(frozen=True, eq=False)
class ClosedForms:
    """Printed closed forms for a built-in.

    ``q_closed`` as printed (real branch); ``orientation`` is the sign of
    q_closed' / sqrt(m). ``V_closed(x, omega)`` is the deformed potential.
    """

    q_closed: Func | None = None
    V_closed: Callable | None = None
    orientation: int = 1


@dataclass(frozen=True)
class Potential:
    """A potential V(x) with its derivative, callable on floats or arrays."""

    V: Callable
    V_prime: Callable

    def __call__(self, x):
        return self.V(x)

    def prime(self, x):
        return self.V_prime(x)

    @classmethod
    def from_expression(cls, text, params=None):
        f = Compiled(text, params)
        return cls(f, f.prime)

    @classmethod
    def zero(cls):
        return cls(lambda x: np.zeros_like(np.asarray(x, dtype=float)) + 0.0,
                   lambda x: np.zeros_like(np.asarray(x, dtype=float)) + 0.0)


# ---------------------------------------------------------------- built-ins


def _q_over_x_series(kind, alpha, x):
    """q(x)/x and its derivative near x = 0 for the two mass-first built-ins."""
    a2x2 = (alpha * x) ** 2
    if kind == "asinh_log":
        # asinh(ax)/(ax) = 1 - (ax)^2/6 + 3 (ax)^4/40 - ...
        r = 1.0 - a2x2 / 6.0 + 3.0 * a2x2**2 / 40.0
        dr = alpha**2 * x * (-1.0 / 3.0 + 3.0 * a2x2 / 10.0)
        return r, dr
    # log_ratio real branch: q = -atanh(ax)/a, q/x = -(1 + (ax)^2/3 + (ax)^4/5)
    r = -(1.0 + a2x2 / 3.0 + a2x2**2 / 5.0)
    dr = -alpha**2 * x * (2.0 / 3.0 + 4.0 * a2x2 / 5.0)
    return r, dr


def _mass_first_deformation(kind, q, qp, alpha, offset, domain):
    """Q = (q/x)^2 with the removable point x = 0 handled by series."""

    def ratio(x):
        x = np.asarray(x, dtype=float)
        small = (np.abs(alpha * x) < 1e-3) & (offset == 0.0)
        xs = np.where(small, 0.5 / alpha, x)
        r = q(xs) / xs
        dr = (qp(xs) * xs - q(xs)) / xs**2
        if small.any():
            rs, drs = _q_over_x_series(kind, alpha, x)
            r = np.where(small, rs, r)
            dr = np.where(small, drs, dr)
        return r, dr

    def Q(x):
        return ratio(x)[0] ** 2

    def Q_prime(x):
        r, dr = ratio(x)
        return 2.0 * r * dr

    return DeformationProfile(Q, Q_prime, domain, None, 0, kind)


def _need(params, name, cond, message):
    value = float(params[name])
    if not cond(value):
        raise ProfileError(f"{name}={value:g}: {message}")
    return value


def builtin(name: str, params: Mapping[str, float] | None = None):
    """(MassProfile, DeformationProfile, ClosedForms) for a built-in example."""
    if name not in BUILTINS:
        raise ProfileError(f"unknown built-in {name!r}; choose from {', '.join(BUILTINS)}")
    full = dict(DEFAULT_PARAMS[name])
    unknown = set(params or {}) - set(full)
    if unknown:
        raise ProfileError(f"{name} does not take parameter(s) {sorted(unknown)}")
    full.update({k: float(v) for k, v in (params or {}).items()})
    return _BUILDERS[name](full)


def _q_first(name, p, m_text, Q_text, q_text, V_text, domain, orientation):
    mc = Compiled(m_text, p)
    mass = MassProfile(mc, mc.prime, domain, name, dict(p))
    Qc = Compiled(Q_text, p)
    deform = DeformationProfile(Qc, Qc.prime, domain, Qc.second, 0, name)
    q = Compiled(q_text, p)
    Vc = Compiled(V_text, p)

    def V(x, omega):
        return 0.5 * omega**2 * Vc(x)

    return mass, deform, ClosedForms(q, V, orientation)


def _constant(p):
    one = Compiled("1")
    mass = MassProfile(one, one.prime, (-math.inf, math.inf), "constant", {})
    deform = DeformationProfile(one, one.prime, mass.domain, one.second, 1, "constant")
    xq = Compiled("x")
    return mass, deform, ClosedForms(xq, lambda x, omega: 0.5 * omega**2 * np.square(x), 1)


def _rational_cubic(p):
    _need(p, "lambda", lambda v: v >= 0.0, "needs lambda >= 0 for m > 0 on all of R")
    return _q_first(
        "rational_cubic", p,
        "(1+lambda*x^2)^(-3)", "1/(1+lambda*x^2)", "x/sqrt(1+lambda*x^2)",
        "x^2/(1+lambda*x^2)", (-math.inf, math.inf), 1,
    )


def _singular_cubic(p):
    lam = _need(p, "lambda", lambda v: v > 0.0, "needs lambda > 0")
    return _q_first(
        "singular_cubic", p,
        "(lambda*x^2-1)^(-3)", "1/(lambda*x^2-1)", "x/sqrt(lambda*x^2-1)",
        "x^2/(lambda*x^2-1)", (1.0 / math.sqrt(lam), math.inf), -1,
    )


def _power_law(p):
    _need(p, "lambda", lambda v: v > 0.0, "needs lambda > 0")
    sigma = _need(p, "sigma", lambda v: v not in (-2.0, 0.0), "sigma must differ from -2 and 0")
    if not (sigma.is_integer() and sigma > 0):
        warnings.warn(f"power_law with sigma={sigma:g} outside the natural numbers", stacklevel=3)
    orientation = 1 if 1.0 + sigma / 2.0 > 0 else -1
    return _q_first(
        "power_law", p,
        "(1+sigma/2)^2*lambda*x^sigma", "lambda*x^sigma", "sqrt(lambda)*x^((sigma+2)/2)",
        "lambda*x^(sigma+2)", (0.0, math.inf), orientation,
    )


def _mass_first(name, p, m_text, q_text, domain, orientation):
    alpha = _need(p, "alpha", lambda v: v > 0.0, "needs alpha > 0")
    offset = float(p["offset"])
    if offset != 0.0:
        # q(0) != 0 makes Q = (q/x)^2 blow up at the origin
        domain = (0.0, domain[1])
    mc = Compiled(m_text, p)
    mass = MassProfile(mc, mc.prime, domain, name, dict(p))
    q = Compiled(q_text, p)
    deform = _mass_first_deformation(name, q, q.prime, alpha, offset, domain)

    def V(x, omega):
        return 0.5 * omega**2 * np.square(q(x))

    return mass, deform, ClosedForms(q, V, orientation)


def _asinh_log(p):
    return _mass_first(
        "asinh_log", p, "1/(alpha^2*x^2+1)", "(asinh(alpha*x)+offset)/alpha",
        (-math.inf, math.inf), 1,
    )


def _log_ratio(p):
    alpha = _need(p, "alpha", lambda v: v > 0.0, "needs alpha > 0")
    return _mass_first(
        "log_ratio", p, "1/(1-alpha^2*x^2)^2",
        "(ln(abs((alpha*x-1)/(alpha*x+1)))+offset)/(2*alpha)",
        (-1.0 / alpha, 1.0 / alpha), -1,
    )


def _morse(p):
    lam = _need(p, "lambda", lambda v: v != 0.0, "needs lambda != 0")
    beta = _need(p, "beta", lambda v: v > 0.0, "needs beta > 0")
    # q^2 = lambda (e^{-2bx} - 2e^{-bx}) > 0 fixes the branch
    domain = (-math.inf, -math.log(2.0) / beta) if lam > 0 else (0.0, math.inf)
    return _q_first(
        "morse", p,
        "lambda*beta^2*(exp(-beta*x)-1)^2/(1-2*exp(beta*x))",
        "lambda*(exp(-2*beta*x)-2*exp(-beta*x))/x^2",
        "sqrt(lambda*(exp(-2*beta*x)-2*exp(-beta*x)))",
        "lambda*(exp(-2*beta*x)-2*exp(-beta*x))",
        domain, -1,
    )


def _yukawa(p):
    _need(p, "V0", lambda v: v < 0.0, "needs V0 < 0 so that m > 0 for x > 0")
    _need(p, "delta", lambda v: v >= 0.0, "needs delta >= 0")
    return _q_first(
        "yukawa", p,
        "-V0/4*(delta*x+1)^2*exp(-delta*x)/x^3",
        "-V0*exp(-delta*x)/x^3",
        "sqrt(-V0*exp(-delta*x)/x)",
        "-V0*exp(-delta*x)/x",
        (0.0, math.inf), -1,
    )


_BUILDERS = {
    "constant": _constant,
    "rational_cubic": _rational_cubic,
    "singular_cubic": _singular_cubic,
    "power_law": _power_law,
    "asinh_log": _asinh_log,
    "log_ratio": _log_ratio,
    "morse": _morse,
    "yukawa": _yukawa,
}


def default_anchor(mass: MassProfile, deform: DeformationProfile | None = None,
                   closed: ClosedForms | None = None, bounds=None):
    """Anchor (x0, q0) for the coordinate map.

    x0 = 0 when the origin is inside the domain, else the midpoint of the
    finite working interval. q0 follows the closed form or the deformation
    when one is known (so V = omega^2 q^2 / 2 is unchanged), else 0.
    """
    lo, hi = mass.domain
    if lo < 0.0 < hi:
        x0 = 0.0
    else:
        a, b = bounds if bounds is not None else (lo, hi)
        a, b = max(a, lo), min(b, hi)
        if math.isinf(a) and math.isinf(b):
            x0 = 0.0
        elif math.isinf(a):
            x0 = b - 1.0
        elif math.isinf(b):
            x0 = a + 1.0
        else:
            x0 = 0.5 * (a + b)
    if closed is not None and closed.q_closed is not None:
        q0 = closed.orientation * float(closed.q_closed(x0))
    elif deform is not None:
        q0 = float(deform.coordinate(x0))
    else:
        q0 = 0.0
    return x0, q0


# -------------------------------------------------------- Q <-> m relations


def mass_from_deformation(d: DeformationProfile, name=None) -> MassProfile:
    """m = Q (1 + x Q'/(2Q))^2, restricted to where the bracket is nonzero."""
    xs = np.linspace(*_finite(d.domain), 4097)[1:-1]
    with np.errstate(all="ignore"):
        b = d.bracket(xs)
    ok = np.isfinite(b) & (b != 0.0)
    if not ok.any():
        raise PositivityError("1 + x Q'/(2Q) vanishes on the whole domain: m = 0")
    sign = np.sign(b)
    # cut at every sign change of the bracket; keep the piece holding the centre
    cuts = np.flatnonzero((sign[:-1] * sign[1:]) <= 0)
    lo, hi = d.domain
    if cuts.size:
        centre = 0.0 if lo < 0.0 < hi else 0.5 * (xs[0] + xs[-1])
        edges = [lo] + [0.5 * (xs[c] + xs[c + 1]) for c in cuts] + [hi]
        pieces = list(zip(edges[:-1], edges[1:]))
        lo, hi = next(((a, bb) for a, bb in pieces if a <= centre <= bb),
                      max(pieces, key=lambda ab: ab[1] - ab[0]))
        lo, hi = _refine_root(d, lo, d.domain[0]), _refine_root(d, hi, d.domain[1])

    Q, Qp, Qpp = d.Q, d.Q_prime, d.Q_second

    def m(x):
        x = np.asarray(x, dtype=float)
        return Q(x) * d.bracket(x) ** 2

    if Qpp is None:
        def m_prime(x):
            x = np.asarray(x, dtype=float)
            h = 1e-4 * np.maximum(1.0, np.abs(x))
            return (m(x - 2 * h) - 8 * m(x - h) + 8 * m(x + h) - m(x + 2 * h)) / (12 * h)
    else:
        def m_prime(x):
            x = np.asarray(x, dtype=float)
            q, qp, qpp = Q(x), Qp(x), Qpp(x)
            br = 1.0 + x * qp / (2.0 * q)
            dbr = qp / (2.0 * q) + x * (qpp * q - qp**2) / (2.0 * q**2)
            return qp * br**2 + 2.0 * q * br * dbr

    return MassProfile(m, m_prime, (lo, hi), name or f"m[{d.name}]", {})


def _finite(domain):
    lo, hi = domain
    if math.isinf(lo) and math.isinf(hi):
        return -_WINDOW, _WINDOW
    if math.isinf(lo):
        return hi - _WINDOW, hi
    if math.isinf(hi):
        return lo, lo + _WINDOW
    return lo, hi


def _refine_root(d, x, edge):
    if x == edge or math.isinf(x):
        return x
    from scipy.optimize import brentq

    h = 1e-2 * max(1.0, abs(x))
    a, b = x - h, x + h
    try:
        return brentq(lambda t: float(d.bracket(t)), a, b, xtol=1e-14)
    except ValueError:
        return x


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def deformation_from_mass(p: MassProfile, cmap) -> DeformationProfile:
    """Q = (q/x)^2 from the coordinate map, with Q(0) = m(0) when 0 is inside.

    The result's domain is the part of the mass domain covered by the map's span.

    Near the origin q(x)/x is evaluated as the mean of sqrt(m) over [0, x]
    (Gauss-Legendre), which avoids the 0/0 cancellation.
    """
    lo, hi = p.domain
    has_origin = lo < 0.0 < hi
    if has_origin:
        q_at_0 = float(cmap.forward(0.0))
        if abs(q_at_0) > 1e-9:
            raise ProfileError(
                f"q(0) = {q_at_0:g} != 0 while the domain contains 0; "
                "Q = (q/x)^2 diverges there (pick the anchor so that q(0) = 0)"
            )
    radius = min(0.25, 0.5 * hi, -0.5 * lo) if has_origin else 0.0

    def ratio(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        r = np.empty_like(x)
        dr = np.empty_like(x)
        near = np.abs(x) <= radius
        if near.any():
            xn = x[near][:, None]
            pts = xn * _GL_T
            s = p.sqrt_m(pts)
            ds = p.m_prime(pts) / (2.0 * s)
            r[near] = s @ _GL_W
            dr[near] = (ds * _GL_T) @ _GL_W
        far = ~near
        if far.any():
            xf = x[far]
            q = cmap.forward(xf)
            r[far] = q / xf
            dr[far] = (p.sqrt_m(xf) * xf - q) / xf**2
        return r, dr

    def Q(x):
        shape = np.shape(x)
        return (ratio(x)[0] ** 2).reshape(shape)

    def Q_prime(x):
        shape = np.shape(x)
        r, dr = ratio(x)
        return (2.0 * r * dr).reshape(shape)

    # the map is only tabulated on its span, so Q is only offered there
    a, b = cmap.span
    domain = (max(lo, float(a)), min(hi, float(b)))
    return DeformationProfile(Q, Q_prime, domain, None, 1, f"Q[{p.name}]")


def _as_float_or_array(x):
    # plain floats keep the scalar fast path of compiled expressions
    if isinstance(x, (float, int)):
        return float(x)
    return np.asarray(x, dtype=float)


def deformed_potential(d: DeformationProfile, omega: float) -> Potential:
    """V = omega^2 Q(x) x^2 / 2 with its derivative."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    w2 = omega * omega

    def V(x):
        x = _as_float_or_array(x)
        return 0.5 * w2 * d.Q(x) * x * x

    def V_prime(x):
        x = _as_float_or_array(x)
        return 0.5 * w2 * (d.Q_prime(x) * x * x + 2.0 * d.Q(x) * x)

    return Potential(V, V_prime)
