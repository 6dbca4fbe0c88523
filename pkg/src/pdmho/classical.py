"""Classical PDM motion: x'' = (-V'(x) - m'(x) v^2 / 2) / m(x), integrated by RK4."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .expr import ExprError
from .profiles import MassProfile, Potential


class TrajectoryError(RuntimeError):
    """Raised when the motion leaves the domain; ``partial`` keeps what was computed."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    x: float
    v: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    energy: np.ndarray
    pseudo_momentum: np.ndarray
    complete: bool = True

    def __len__(self):
        return self.t.size

    def __getitem__(self, i):
        return TrajectoryPoint(float(self.t[i]), float(self.x[i]), float(self.v[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def relative_energy_drift(self):
        e0 = self.energy[0]
        scale = abs(e0) if e0 != 0 else 1.0
        return float(np.max(np.abs(self.energy - e0)) / scale)

    def pseudo_momentum_drift(self):
        return float(np.max(np.abs(self.pseudo_momentum - self.pseudo_momentum[0])))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "v", "energy", "pseudo_momentum"])
        for row in zip(self.t, self.x, self.v, self.energy, self.pseudo_momentum):
            w.writerow([f"{float(c):.17g}" for c in row])
        return buf.getvalue()


def acceleration(p: MassProfile, V: Potential | None, x, v):
    m = p.m(x)
    force = -V.prime(x) if V is not None else 0.0
    return (force - 0.5 * p.m_prime(x) * v * v) / m


def energy(p: MassProfile, V: Potential | None, x, v):
    e = 0.5 * p.m(x) * v * v
    return e + V(x) if V is not None else e


def pseudo_momentum(p: MassProfile, x, v):
    return np.sqrt(p.m(x)) * v


def integrate(p: MassProfile, V: Potential | None, x0: float, v0: float, dt: float,
              steps: int) -> Trajectory:
    """Fixed-step classical RK4 on (x, v).

    If a stage leaves the domain, a TrajectoryError carrying the points up to
    the last valid one is raised.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    steps = int(steps)
    if steps < 0:
        raise ValueError("steps must be non-negative")
    lo, hi = p.domain
    if not lo < x0 < hi:
        raise ValueError(f"x0={x0} is outside the domain {p.domain}")

    def rhs(x, v):
        if not lo < x < hi:
            raise ExprError(f"x={x!r} left the domain {p.domain}")
        return v, float(acceleration(p, V, x, v))

    xs = np.empty(steps + 1)
    vs = np.empty(steps + 1)
    xs[0], vs[0] = x0, v0
    x, v = float(x0), float(v0)
    done = steps
    for i in range(steps):
        try:
            k1x, k1v = rhs(x, v)
            k2x, k2v = rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
            k3x, k3v = rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
            k4x, k4v = rhs(x + dt * k3x, v + dt * k3v)
        except ExprError as exc:
            done = i
            partial = _build(p, V, dt, xs[: i + 1], vs[: i + 1], complete=False)
            raise TrajectoryError(
                f"trajectory left the domain after t={i * dt:.17g}: {exc}", partial
            ) from exc
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (math.isfinite(x) and math.isfinite(v)):
            partial = _build(p, V, dt, xs[: i + 1], vs[: i + 1], complete=False)
            raise TrajectoryError(f"trajectory diverged after t={i * dt:.17g}", partial)
        xs[i + 1], vs[i + 1] = x, v
    return _build(p, V, dt, xs[: done + 1], vs[: done + 1])


def _build(p, V, dt, xs, vs, complete=True):
    t = dt * np.arange(xs.size)
    return Trajectory(t, xs.copy(), vs.copy(), np.asarray(energy(p, V, xs, vs), dtype=float),
                      np.asarray(pseudo_momentum(p, xs, vs), dtype=float), complete)


def energy_drift_order(p: MassProfile, V: Potential, x0: float, v0: float, T: float,
                       dts=(0.2, 0.1, 0.05)):
    """Observed order of the final relative energy error under dt-halving."""
    drifts = []
    for dt in dts:
        steps = int(round(T / dt))
        traj = integrate(p, V, x0, v0, dt, steps)
        e0 = traj.energy[0]
        drifts.append(abs(traj.energy[-1] - e0) / (abs(e0) if e0 else 1.0))
    orders = [math.log(drifts[i] / drifts[i + 1]) / math.log(dts[i] / dts[i + 1])
              for i in range(len(dts) - 1)]
    return drifts, orders
