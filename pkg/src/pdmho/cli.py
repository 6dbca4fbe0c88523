"""Command-line front end: ``pdmho {spectrum,derive,verify,eigenfunction,classical}``.

Exit codes: 0 success, 1 bad arguments or configuration, 2 numerical failure
(including positivity violations), 3 spectral comparison skipped because the
profile's q-range is bounded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .classical import TrajectoryError, integrate
from .coord import CoordinateRangeError, Grid, QuadratureError, build_map_for
from .expr import ExprDomainError, ExprError, serialize
from .operators import (
    OperatorError,
    OrderingParams,
    OscillatorConfig,
    hamiltonian_H1,
    hamiltonian_H2_on_q,
    hamiltonian_vonroos,
)
from .profiles import (
    BUILTINS,
    DeformationProfile,
    MassProfile,
    PositivityError,
    Potential,
    ProfileError,
    builtin,
    deformation_from_mass,
    deformed_potential,
    mass_from_deformation,
)
from .spectra import EigenError, analytic_energy, analytic_phi, eigen_symmetric_tridiagonal, overlap
from .verify import SKIPPED, SUITES, reports_table, reports_to_json, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SKIPPED = 0, 1, 2, 3
DEFAULT_BOUNDS = (-20.0, 20.0)
DEFAULT_N = 4000
DERIVE_GRID = (-5.0, 5.0, 101)


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; configuration errors are 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fmt(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def _param(text):
    name, sep, value = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {name!r} needs a number, got {value!r}") from None


def _bound(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


# ----------------------------------------------------------------- parser


def _add_profile(p, required=True):
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--builtin", choices=BUILTINS, help="built-in profile name")
    src.add_argument("--m-expr", metavar="EXPR", help="mass m(x) as an expression")
    src.add_argument("--Q-expr", metavar="EXPR", help="deformation Q(x) as an expression")
    p.add_argument("--param", action="append", type=_param, default=[], metavar="NAME=VALUE",
                   help="parameter binding (repeatable)")
    p.add_argument("--domain", nargs=2, type=_bound, metavar=("LO", "HI"),
                   help="open domain for expression profiles (default: whole line; 'inf' allowed)")


def _add_numerics(p, grid_default=True):
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--grid", nargs=3, metavar=("XMIN", "XMAX", "N"),
                   help="uniform x-grid (default: [-20, 20] clipped to the domain, N=4000)")
    p.add_argument("--ordering", type=float, default=-0.25, metavar="A",
                   help="von Roos exponent a (b = -1/2 - a); default -0.25")


def _add_output(p, formats=("csv", "json"), default="csv"):
    p.add_argument("--output", "-o", metavar="PATH", help="write here instead of stdout")
    p.add_argument("--format", choices=formats, default=default)


def build_parser():
    parser = _Parser(prog="pdmho", description="Position-dependent-mass oscillator toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("spectrum", help="lowest eigenvalues against w(n+1/2)")
    _add_profile(sp)
    _add_numerics(sp)
    sp.add_argument("--levels", type=int, default=6)
    sp.add_argument("--hamiltonian", choices=("h1", "h2q", "vonroos"), default="h1")
    _add_output(sp)

    dp = sub.add_parser("derive", help="tabulate x, m, Q, q, V from Q(x) or m(x)")
    src = dp.add_mutually_exclusive_group(required=True)
    src.add_argument("--from-Q", metavar="EXPR")
    src.add_argument("--from-m", metavar="EXPR")
    src.add_argument("--builtin", choices=BUILTINS)
    dp.add_argument("--param", action="append", type=_param, default=[], metavar="NAME=VALUE")
    dp.add_argument("--domain", nargs=2, type=_bound, metavar=("LO", "HI"))
    dp.add_argument("--omega", type=float, default=1.0)
    dp.add_argument("--grid", nargs=3, metavar=("XMIN", "XMAX", "N"),
                    help="default: [-5, 5] clipped to the domain, N=101")
    _add_output(dp)

    vp = sub.add_parser("verify", help="operator-identity residual suites")
    _add_profile(vp)
    _add_numerics(vp)
    vp.add_argument("--suite", choices=SUITES + ("all",), default="all")
    vp.add_argument("--sizes", nargs="+", type=int, metavar="N",
                    help="grid sizes for refinement (default 500 1000 2000 4000)")
    _add_output(vp, formats=("json", "table"), default="json")

    ep = sub.add_parser("eigenfunction", help="grid eigenvector of H1 against m^1/4 Psi_n(q)")
    _add_profile(ep)
    _add_numerics(ep)
    ep.add_argument("--n", type=int, default=0, dest="level")
    _add_output(ep)

    cp = sub.add_parser("classical", help="RK4 trajectory of the classical PDM equation")
    _add_profile(cp)
    cp.add_argument("--omega", type=float, default=1.0)
    vsrc = cp.add_mutually_exclusive_group()
    vsrc.add_argument("--V", choices=("oscillator", "zero"), default="zero")
    vsrc.add_argument("--V-expr", metavar="EXPR")
    cp.add_argument("--x0", type=float, required=True)
    cp.add_argument("--v0", type=float, required=True)
    cp.add_argument("--dt", type=float, default=1e-3)
    steps = cp.add_mutually_exclusive_group()
    steps.add_argument("--steps", type=int)
    steps.add_argument("--T", type=float, default=50.0)
    _add_output(cp)
    return parser


# -------------------------------------------------------------- profiles


@dataclass
class Problem:
    mass: MassProfile
    deform: DeformationProfile | None
    closed: object
    label: str


def _params(args):
    return dict(args.param)


def _domain(args):
    if args.domain is None:
        return (-math.inf, math.inf)
    lo, hi = args.domain
    if not lo < hi:
        raise ConfigError(f"--domain needs LO < HI, got {lo} {hi}")
    return (lo, hi)


def load_problem(args, m_text=None, Q_text=None) -> Problem:
    params = _params(args)
    name = getattr(args, "builtin", None)
    m_text = m_text or getattr(args, "m_expr", None)
    Q_text = Q_text or getattr(args, "Q_expr", None)
    if name:
        if args.domain is not None:
            raise ConfigError("--domain applies to expression profiles only")
        mass, deform, closed = builtin(name, params)
        return Problem(mass, deform, closed, name)
    if m_text is not None:
        mass = MassProfile.from_expression(m_text, params, _domain(args))
        return Problem(mass, None, None, m_text)
    deform = DeformationProfile.from_expression(Q_text, params, _domain(args))
    return Problem(mass_from_deformation(deform), deform, None, Q_text)


def default_bounds(domain, window=DEFAULT_BOUNDS):
    """``window`` clipped to ``domain``, kept 1% of its width off finite ends."""
    lo, hi = domain
    a, b = max(window[0], lo), min(window[1], hi)
    if not a < b:
        a, b = (lo, lo + (window[1] - window[0])) if math.isfinite(lo) else (hi - (window[1] - window[0]), hi)
    pad = 0.01 * (b - a)
    if a == lo:
        a += pad
    if b == hi:
        b -= pad
    return a, b


def _grid_spec(args, problem, default_window=DEFAULT_BOUNDS, default_n=DEFAULT_N):
    if args.grid is None:
        return default_bounds(problem.mass.domain, default_window), default_n
    try:
        lo, hi, n = float(args.grid[0]), float(args.grid[1]), int(args.grid[2])
    except ValueError:
        raise ConfigError(f"--grid needs XMIN XMAX N, got {' '.join(args.grid)}") from None
    if not lo < hi:
        raise ConfigError(f"--grid needs XMIN < XMAX, got {lo} {hi}")
    return (lo, hi), n


def _config(args, problem):
    bounds, n = _grid_spec(args, problem)
    try:
        ordering = OrderingParams.from_a(args.ordering)
        return OscillatorConfig(args.omega, bounds, n, ordering)
    except OperatorError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------- output


class _Out:
    def __init__(self, path):
        self.path = path
        self.buf = io.StringIO()

    def comment(self, text):
        for line in str(text).splitlines():
            self.buf.write(f"# {line}\n")

    def write(self, text):
        self.buf.write(text)

    def rows(self, header, rows):
        w = csv.writer(self.buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([c if isinstance(c, str) else _fmt(c) for c in r])

    def flush(self):
        data = self.buf.getvalue()
        if self.path:
            with open(self.path, "w", encoding="utf-8", newline="") as fh:
                fh.write(data)
        else:
            sys.stdout.write(data)


def _json_rows(header, rows):
    def clean(v):
        if isinstance(v, str):
            return v
        v = float(v)
        return v if math.isfinite(v) else None

    return [dict(zip(header, (clean(c) for c in r))) for r in rows]


# -------------------------------------------------------------- commands


def cmd_spectrum(args):
    problem = load_problem(args)
    cfg = _config(args, problem)
    if args.levels < 1:
        raise ConfigError("--levels must be at least 1")
    cmap = build_map_for(problem.mass, problem.deform, problem.closed, cfg.bounds)
    g = cfg.grid()
    q = cmap.forward(g.points)
    w = cfg.omega
    V = 0.5 * w * w * q * q
    if args.hamiltonian == "h1":
        H = hamiltonian_H1(problem.mass, g, cfg, V)
    elif args.hamiltonian == "vonroos":
        H = hamiltonian_vonroos(problem.mass, g, cfg, V)
    else:
        gq = Grid.uniform(float(q[0]), float(q[-1]), g.n, "q")
        H = hamiltonian_H2_on_q(cfg, lambda s: 0.5 * w * w * s * s, gq, cmap.q_range())
    spec = eigen_symmetric_tridiagonal(H, min(args.levels, g.n))
    q_lo, q_hi = cmap.q_range()
    skipped = not cmap.onto_real
    header = ["n", "E_numeric", "E_analytic", "abs_err"]
    rows = []
    for k, e in enumerate(spec.eigenvalues):
        exact = analytic_energy(k, w)
        rows.append([str(k), e, exact, math.nan if skipped else abs(e - exact)])
    out = _Out(args.output)
    note = (f"SKIPPED: q-range ({q_lo:.17g}, {q_hi:.17g}) is bounded; "
            "no comparison with w(n+1/2) is made")
    if args.format == "json":
        payload = {"profile": problem.label, "hamiltonian": args.hamiltonian, "omega": w,
                   "grid": [cfg.bounds[0], cfg.bounds[1], cfg.n],
                   "status": SKIPPED if skipped else "ok", "levels": _json_rows(header, rows)}
        if skipped:
            payload["note"] = note
        out.write(json.dumps(payload, indent=2) + "\n")
    else:
        out.comment(f"profile={problem.label} hamiltonian={args.hamiltonian} omega={_fmt(w)} "
                    f"grid={_fmt(cfg.bounds[0])},{_fmt(cfg.bounds[1])},{cfg.n}")
        if skipped:
            out.comment(note)
        out.rows(header, rows)
    out.flush()
    return EXIT_SKIPPED if skipped else EXIT_OK


def _partner_lines(problem):
    lines = []
    for label, f in (("m(x)", problem.mass.m), ("Q(x)", problem.deform.Q if problem.deform else None),
                     ("q(x)", getattr(problem.closed, "q_closed", None))):
        e = getattr(f, "expr", None)
        if e is not None:
            lines.append(f"closed form {label} = {serialize(e)}")
    orient = getattr(problem.closed, "orientation", 1)
    if orient != 1:
        lines.append("the increasing map is the negative of the closed-form q(x)")
    return lines


def cmd_derive(args):
    params = _params(args)
    if args.builtin:
        problem = load_problem(argparse.Namespace(builtin=args.builtin, param=args.param, domain=args.domain))
    elif args.from_m is not None:
        mass = MassProfile.from_expression(args.from_m, params, _domain(args))
        problem = Problem(mass, None, None, args.from_m)
    else:
        deform = DeformationProfile.from_expression(args.from_Q, params, _domain(args))
        problem = Problem(mass_from_deformation(deform), deform, None, args.from_Q)
    bounds, n = _grid_spec(args, problem, DERIVE_GRID[:2], DERIVE_GRID[2])
    if n < 2:
        raise ConfigError("--grid needs at least 2 points")
    lo, hi = problem.mass.domain
    if not (lo < bounds[0] and bounds[1] < hi):
        raise ConfigError(f"grid [{bounds[0]}, {bounds[1]}] leaves the domain ({lo}, {hi})")
    cmap = build_map_for(problem.mass, problem.deform, problem.closed, bounds)
    deform = problem.deform or deformation_from_mass(problem.mass, cmap)
    x = np.linspace(bounds[0], bounds[1], n)
    m = np.asarray(problem.mass.m(x), dtype=float)
    bad = ~(m > 0)
    if bad.any():
        raise PositivityError(f"m(x) is not positive at x={float(x[bad][0])!r}", float(x[bad][0]))
    Q = np.asarray(deform.Q(x), dtype=float)
    q = cmap.forward(x)
    V = np.asarray(deformed_potential(deform, args.omega)(x), dtype=float)
    header = ["x", "m", "Q", "q", "V"]
    rows = list(zip(x, m, Q, q, V))
    out = _Out(args.output)
    if args.format == "json":
        payload = {"profile": problem.label, "omega": args.omega, "rows": _json_rows(header, rows)}
        if args.builtin:
            payload["closed_forms"] = _partner_lines(problem)
        out.write(json.dumps(payload, indent=2) + "\n")
    else:
        out.comment(f"profile={problem.label} omega={_fmt(args.omega)} anchor x0={_fmt(cmap.x0)} q0={_fmt(cmap.q0)}")
        if args.builtin:
            for line in _partner_lines(problem):
                out.comment(line)
        out.rows(header, rows)
    out.flush()
    return EXIT_OK


def cmd_verify(args):
    problem = load_problem(args)
    cfg = _config(args, problem)
    sizes = tuple(args.sizes) if args.sizes else None
    if sizes is not None and (len(sizes) < 2 or min(sizes) < 16):
        raise ConfigError("--sizes needs at least two sizes, each >= 16")
    cmap = build_map_for(problem.mass, problem.deform, problem.closed, cfg.bounds)
    reports = run_suite(args.suite, problem.mass, cmap, cfg, sizes)
    out = _Out(args.output)
    out.write((reports_table(reports) if args.format == "table" else reports_to_json(reports)) + "\n")
    out.flush()
    failed = [r.check_name for r in reports if r.status != SKIPPED and not r.passed]
    if failed:
        print("failed checks: " + "; ".join(failed), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_eigenfunction(args):
    problem = load_problem(args)
    cfg = _config(args, problem)
    n = args.level
    if n < 0:
        raise ConfigError("--n must be non-negative")
    cmap = build_map_for(problem.mass, problem.deform, problem.closed, cfg.bounds)
    g = cfg.grid()
    q = cmap.forward(g.points)
    w = cfg.omega
    spec = eigen_symmetric_tridiagonal(hamiltonian_H1(problem.mass, g, cfg, 0.5 * w * w * q * q), n + 1)
    numeric = spec.vector(n)
    analytic = analytic_phi(n, w, problem.mass, cmap, g.points)
    if float(numeric @ analytic) < 0:
        numeric = -numeric
    ov = overlap(numeric, analytic, g.h)
    skipped = not cmap.onto_real
    header = ["x", f"phi_{n}_analytic", f"phi_{n}_grid"]
    rows = list(zip(g.points, analytic, numeric))
    out = _Out(args.output)
    q_lo, q_hi = cmap.q_range()
    note = f"SKIPPED: q-range ({q_lo:.17g}, {q_hi:.17g}) is bounded; overlap is not a test of the analytic state"
    if args.format == "json":
        payload = {"profile": problem.label, "n": n, "omega": w, "overlap": ov,
                   "status": SKIPPED if skipped else "ok", "rows": _json_rows(header, rows)}
        out.write(json.dumps(payload, indent=2) + "\n")
    else:
        out.comment(f"profile={problem.label} n={n} omega={_fmt(w)} overlap={_fmt(ov)}")
        if skipped:
            out.comment(note)
        out.rows(header, rows)
    out.flush()
    print(f"overlap={ov:.12f}", file=sys.stderr)
    return EXIT_SKIPPED if skipped else EXIT_OK


def _classical_potential(args, problem):
    if args.V_expr is not None:
        return Potential.from_expression(args.V_expr, _params(args))
    if args.V == "zero":
        return None
    if problem.deform is not None:
        return deformed_potential(problem.deform, args.omega)
    span = default_bounds(problem.mass.domain)
    cmap = build_map_for(problem.mass, None, None, span)
    return deformed_potential(deformation_from_mass(problem.mass, cmap), args.omega)


def cmd_classical(args):
    problem = load_problem(args)
    if not args.dt > 0:
        raise ConfigError("--dt must be positive")
    steps = args.steps if args.steps is not None else int(round(args.T / args.dt))
    if steps < 1:
        raise ConfigError("need at least one step")
    V = _classical_potential(args, problem)
    status = EXIT_OK
    try:
        traj = integrate(problem.mass, V, args.x0, args.v0, args.dt, steps)
    except TrajectoryError as exc:
        traj = exc.partial
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_NUMERIC
    out = _Out(args.output)
    header = ["t", "x", "v", "energy", "pseudo_momentum"]
    rows = list(zip(traj.t, traj.x, traj.v, traj.energy, traj.pseudo_momentum))
    e_drift = traj.relative_energy_drift()
    p_drift = traj.pseudo_momentum_drift()
    if args.format == "json":
        payload = {"profile": problem.label, "dt": args.dt, "steps": len(traj) - 1,
                   "complete": traj.complete, "relative_energy_drift": e_drift,
                   "pseudo_momentum_drift": p_drift, "trajectory": _json_rows(header, rows)}
        out.write(json.dumps(payload, indent=2) + "\n")
    else:
        out.comment(f"profile={problem.label} dt={_fmt(args.dt)} steps={len(traj) - 1} complete={traj.complete}")
        out.comment(f"relative_energy_drift={_fmt(e_drift)} pseudo_momentum_drift={_fmt(p_drift)}")
        out.rows(header, rows)
    out.flush()
    return status


COMMANDS = {
    "spectrum": cmd_spectrum,
    "derive": cmd_derive,
    "verify": cmd_verify,
    "eigenfunction": cmd_eigenfunction,
    "classical": cmd_classical,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, OperatorError, CoordinateRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PositivityError, ExprDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ProfileError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, EigenError, TrajectoryError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
