"""Operator identities as numerical residuals with grid-refinement orders.

A residual is the largest interior row sum of (lhs - rhs), i.e. the
identity applied to the constant grid function, with a margin of
``MARGIN`` points dropped at each Dirichlet end.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coord import CoordinateMap, Grid
from .operators import (
    GridOperator,
    OscillatorConfig,
    commutator,
    compose,
    hamiltonian_H1,
    hamiltonian_H2_on_q,
    hamiltonian_H2_on_x,
    ladder_A,
    momentum_pi,
    position,
)
from .profiles import MassProfile
from .spectra import analytic_energy, eigen_symmetric_tridiagonal

MARGIN = 5
DEFAULT_SIZES = (500, 1000, 2000, 4000)
ISOSPECTRAL_SIZES = (1000, 2000, 4000)
MIN_ORDER = 1.8
EXACT_FLOOR = 1e-10
HAMILTONIAN_FLOOR = 1e-8
LEVELS = 6

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"


@dataclass(frozen=True)
class ResidualReport:
    check_name: str
    grid_sizes: list
    residuals: list
    estimated_order: float
    passed: bool
    threshold: float
    status: str = PASS
    note: str = ""

    def to_dict(self):
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        d = asdict(self)
        d["residuals"] = [clean(float(r)) for r in self.residuals]
        d["grid_sizes"] = [int(n) for n in self.grid_sizes]
        d["estimated_order"] = clean(float(self.estimated_order))
        d["threshold"] = float(self.threshold)
        return d

    def to_json(self):
        return json.dumps(self.to_dict())


def reports_to_json(reports, indent=2):
    return json.dumps([r.to_dict() for r in reports], indent=indent)


def reports_table(reports):
    head = f"{'check':42s} {'status':8s} {'final':>11s} {'order':>7s} {'threshold':>10s}"
    lines = [head, "-" * len(head)]
    for r in reports:
        final = f"{r.residuals[-1]:.3e}" if r.residuals else "-"
        order = "-" if not math.isfinite(r.estimated_order) else f"{r.estimated_order:.2f}"
        lines.append(f"{r.check_name:42s} {r.status:8s} {final:>11s} {order:>7s} {r.threshold:10.1e}")
        if r.note:
            lines.append(f"    {r.note}")
    return "\n".join(lines)


def interior_residual(op: GridOperator, margin: int = MARGIN) -> float:
    rows = op.row_sums()[margin:-margin]
    return float(np.max(np.abs(rows)))


def estimate_order(sizes, residuals, bounds, floor=EXACT_FLOOR):
    """log(r1/r2) / log(h1/h2) for the two finest grids.

    NaN when either residual is already at the rounding floor.
    """
    if len(sizes) < 2:
        return math.nan
    h = [(bounds[1] - bounds[0]) / (n - 1) for n in sizes[-2:]]
    r1, r2 = residuals[-2:]
    if not (r1 > floor and r2 > floor):
        return math.nan
    return math.log(r1 / r2) / math.log(h[0] / h[1])


def _refinement_report(name, sizes, residuals, bounds, threshold, note="", floor=EXACT_FLOOR):
    order = estimate_order(sizes, residuals, bounds, floor)
    final = residuals[-1]
    exact = max(residuals) <= floor
    passed = bool(exact or (final <= threshold and order >= MIN_ORDER))
    return ResidualReport(name, list(sizes), [float(r) for r in residuals], order, passed,
                          threshold, PASS if passed else FAIL, note)


def _grids(cfg, sizes):
    return [cfg.grid(n) for n in sizes]


# ------------------------------------------------------------------ checks


def check_canonical(p: MassProfile, cfg: OscillatorConfig, sizes=DEFAULT_SIZES) -> ResidualReport:
    """[X, pi] + I on interior rows; exact for central differences."""
    res = []
    for g in _grids(cfg, sizes):
        op = commutator(position(g).widened(1), momentum_pi(p, g)) + GridOperator.identity(g)
        res.append(interior_residual(op))
    passed = max(res) <= EXACT_FLOOR
    return ResidualReport("canonical [X,pi]=-I", list(sizes), res, math.nan, passed,
                          EXACT_FLOOR, PASS if passed else FAIL)


def check_ladder_commutator(p: MassProfile, cmap: CoordinateMap, cfg: OscillatorConfig,
                            sizes=DEFAULT_SIZES, threshold=1e-3) -> ResidualReport:
    res = []
    for g in _grids(cfg, sizes):
        q = cmap.forward(g.points)
        A = ladder_A(p, g, cmap, cfg, False, q=q)
        Ad = ladder_A(p, g, cmap, cfg, True, q=q)
        res.append(interior_residual(commutator(A, Ad) - GridOperator.identity(g)))
    o = cfg.ordering
    name = "ladder [A,A+]=I" + ("" if o.a == o.b == -0.25 else f" (a={o.a:g}, b={o.b:g})")
    return _refinement_report(name, sizes, res, cfg.bounds, threshold)


def _oscillator_V(cmap, omega, x):
    return 0.5 * omega * omega * cmap.forward(x) ** 2


def check_factorization(p: MassProfile, cmap: CoordinateMap, cfg: OscillatorConfig,
                        sizes=DEFAULT_SIZES, threshold=1e-3) -> ResidualReport:
    """H1 = w (A+A + 1/2) = w (AA+ - 1/2)."""
    w = cfg.omega
    res = []
    for g in _grids(cfg, sizes):
        q = cmap.forward(g.points)
        A = ladder_A(p, g, cmap, cfg, False, q=q)
        Ad = ladder_A(p, g, cmap, cfg, True, q=q)
        H1 = hamiltonian_H1(p, g, cfg, 0.5 * w * w * q * q)
        half = GridOperator.identity(g) * 0.5
        r1 = interior_residual((compose(Ad, A) + half) * w - H1)
        r2 = interior_residual((compose(A, Ad) - half) * w - H1)
        res.append(max(r1, r2))
    return _refinement_report(f"factorization H1=w(A+A+1/2) w={w:g}", sizes, res, cfg.bounds, threshold)


def check_similarity(p: MassProfile, cfg: OscillatorConfig, V=None, sizes=DEFAULT_SIZES,
                     threshold=1e-3) -> ResidualReport:
    """m^(1/4) H2 m^(-1/4) - H1 on interior rows."""
    res = []
    for g in _grids(cfg, sizes):
        v = np.zeros(g.n) if V is None else np.asarray(V(g.points), dtype=float) * np.ones(g.n)
        m4 = np.asarray(p.m(g.points), dtype=float) ** 0.25
        H2 = hamiltonian_H2_on_x(p, g, cfg, v).scale_left(m4).scale_right(1.0 / m4)
        res.append(interior_residual(H2 - hamiltonian_H1(p, g, cfg, v)))
    return _refinement_report("similarity m^1/4 H2 m^-1/4 = H1", sizes, res, cfg.bounds, threshold)


def check_isospectral(p: MassProfile, cmap: CoordinateMap, cfg: OscillatorConfig,
                      sizes=ISOSPECTRAL_SIZES, levels=LEVELS, threshold=1e-3) -> ResidualReport:
    """Lowest levels of H1 on the x-grid against w(n + 1/2).

    Skipped unless the map takes the domain onto the whole real line.
    """
    name = "isospectral E_n = w(n+1/2)"
    q_lo, q_hi = cmap.q_range()
    if not cmap.onto_real:
        return ResidualReport(name, list(sizes), [math.nan] * len(sizes), math.nan, False, threshold,
                              SKIPPED, f"q-range ({q_lo:.12g}, {q_hi:.12g}) is bounded")
    w = cfg.omega
    exact = np.array([analytic_energy(k, w) for k in range(levels)])
    res, gap = [], []
    for g in _grids(cfg, sizes):
        q = cmap.forward(g.points)
        E1 = eigen_symmetric_tridiagonal(hamiltonian_H1(p, g, cfg, 0.5 * w * w * q * q), levels).eigenvalues
        res.append(float(np.max(np.abs(E1 - exact))))
        qa, qb = q[0], q[-1]
        gq = Grid.uniform(qa, qb, g.n, "q")
        E2 = eigen_symmetric_tridiagonal(hamiltonian_H2_on_q(cfg, lambda s: 0.5 * w * w * s * s, gq),
                                         levels).eigenvalues
        gap.append(float(np.max(np.abs(E1 - E2))))
    order = estimate_order(sizes, res, cfg.bounds)
    passed = res[-1] <= threshold
    note = f"max |E(H1,x) - E(H2,q)| at n={sizes[-1]}: {gap[-1]:.3e}"
    return ResidualReport(name, list(sizes), res, order, passed, threshold,
                          PASS if passed else FAIL, note)


def check_hamiltonian_commutators(p: MassProfile, cmap: CoordinateMap, cfg: OscillatorConfig,
                                  sizes=DEFAULT_SIZES, omega_free=False,
                                  threshold=1e-2) -> ResidualReport:
    """[H1, A] + wA and [H1, A+] - wA+ (w -> 1 for the omega-free variant)."""
    w = cfg.omega
    k = 1.0 if omega_free else w
    res = []
    for g in _grids(cfg, sizes):
        q = cmap.forward(g.points)
        A = ladder_A(p, g, cmap, cfg, False, q=q)
        Ad = ladder_A(p, g, cmap, cfg, True, q=q)
        H1 = hamiltonian_H1(p, g, cfg, 0.5 * w * w * q * q)
        r1 = interior_residual(commutator(H1, A) + A * k)
        r2 = interior_residual(commutator(H1, Ad) - Ad * k)
        res.append(max(r1, r2))
    name = "hamiltonian commutators " + ("[A,H1]=A" if omega_free else f"[H1,A]=-wA w={w:g}")
    # products of second- and first-order stencils carry h^-3 sized entries
    return _refinement_report(name, sizes, res, cfg.bounds, threshold, floor=HAMILTONIAN_FLOOR)


SUITES = ("canonical", "ladder", "factorization", "similarity", "isospectral",
          "hamiltonian-commutators")


def run_suite(suite: str, p: MassProfile, cmap: CoordinateMap, cfg: OscillatorConfig,
              sizes=None) -> list[ResidualReport]:
    names = SUITES if suite == "all" else (suite,)
    out = []
    for name in names:
        kw = {} if sizes is None else {"sizes": sizes}
        if name == "canonical":
            out.append(check_canonical(p, cfg, **kw))
        elif name == "ladder":
            out.append(check_ladder_commutator(p, cmap, cfg, **kw))
        elif name == "factorization":
            out.append(check_factorization(p, cmap, cfg, **kw))
        elif name == "similarity":
            out.append(check_similarity(p, cfg, lambda x: _oscillator_V(cmap, cfg.omega, x), **kw))
        elif name == "isospectral":
            iso = {} if sizes is None else {"sizes": sizes[-3:] if len(sizes) > 3 else sizes}
            out.append(check_isospectral(p, cmap, cfg, **iso))
        elif name == "hamiltonian-commutators":
            out.append(check_hamiltonian_commutators(p, cmap, cfg, **kw))
        else:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    return out
