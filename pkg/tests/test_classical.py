import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import classical_reference
from pdmho.classical import (
    Trajectory,
    TrajectoryError,
    acceleration,
    energy,
    energy_drift_order,
    integrate,
    pseudo_momentum,
)
from pdmho.profiles import MassProfile, Potential, builtin, deformed_potential


def oscillator_V(omega=1.0):
    return Potential.from_expression("omega^2*x^2/2", {"omega": omega})


# ---------------------------------------------------------------- examples


def test_acceleration_examples():
    const, _, _ = builtin("constant")
    assert acceleration(const, oscillator_V(), 1.0, 0.0) == -1.0
    rc, _, _ = builtin("rational_cubic", {"lambda": 1.0})
    assert acceleration(rc, None, 1.0, 1.0) == pytest.approx(1.5, rel=1e-14)
    for name in ("rational_cubic", "asinh_log", "yukawa"):
        m, _, _ = builtin(name)
        assert acceleration(m, None, 1.3, 0.0) == 0.0


def test_simple_harmonic_period():
    const, _, _ = builtin("constant")
    traj = integrate(const, oscillator_V(), 1.0, 0.0, 1e-3, 6284)
    # 6284 steps overshoot 2 pi by 1.8e-4, which moves x by about 1.6e-8
    assert traj.x[-1] == pytest.approx(math.cos(traj.t[-1]), abs=1e-10)
    assert traj.x[-1] == pytest.approx(1.0, abs=1e-6)


def test_pseudo_momentum_is_conserved_without_force():
    m, _, _ = builtin("asinh_log", {"alpha": 1.0})
    traj = integrate(m, None, 0.0, 1.0, 1e-3, 50_000)
    assert traj.pseudo_momentum_drift() <= 1e-8
    assert traj.complete and len(traj) == 50_001


def test_energy_drift_on_rational_cubic():
    m, d, _ = builtin("rational_cubic", {"lambda": 0.1})
    traj = integrate(m, deformed_potential(d, 1.0), 1.0, 0.0, 1e-3, 50_000)
    assert traj.relative_energy_drift() <= 1e-8


def test_energy_drift_order():
    m, d, _ = builtin("rational_cubic", {"lambda": 0.1})
    drifts, orders = energy_drift_order(m, deformed_potential(d, 1.0), 1.0, 0.0, 50.0)
    assert drifts[0] > drifts[1] > drifts[2]
    assert min(orders) >= 3.5


# ----------------------------------------------------------------- oracles


@pytest.mark.parametrize("name, params, x0, v0", [
    ("rational_cubic", {"lambda": 0.3}, 0.8, 0.2),
    ("asinh_log", {"alpha": 0.5}, -1.0, 0.7),
    ("log_ratio", {"alpha": 0.2}, 0.5, 0.3),
])
def test_matches_dop853(name, params, x0, v0):
    m, d, _ = builtin(name, params)
    V = deformed_potential(d, 1.0)
    dt, steps = 4e-3, 1500
    traj = integrate(m, V, x0, v0, dt, steps)
    xs, vs = classical_reference(m.m, m.m_prime, V.prime, x0, v0, dt * steps, traj.t)
    np.testing.assert_allclose(traj.x, xs, atol=1e-8)
    np.testing.assert_allclose(traj.v, vs, atol=1e-8)


@settings(max_examples=25)
@given(st.floats(-2.0, 2.0), st.floats(-1.0, 1.0), st.floats(0.05, 1.0))
def test_pseudo_momentum_property(x0, v0, alpha):
    m, _, _ = builtin("asinh_log", {"alpha": alpha})
    traj = integrate(m, None, x0, v0, 1e-2, 500)
    assert traj.pseudo_momentum_drift() <= 1e-8 * max(1.0, abs(v0))


@settings(max_examples=25)
@given(st.floats(0.1, 3.0), st.floats(0.3, 3.0))
def test_constant_mass_period(amplitude, omega):
    const, _, _ = builtin("constant")
    period = 2 * math.pi / omega
    steps = 4000
    traj = integrate(const, oscillator_V(omega), amplitude, 0.0, period / steps, steps)
    assert traj.x[-1] == pytest.approx(amplitude, rel=1e-6)


# ------------------------------------------------------------------ errors


def test_leaving_the_domain_keeps_the_partial_trajectory():
    m, _, _ = builtin("power_law", {"sigma": 2.0})
    with pytest.raises(TrajectoryError) as info:
        integrate(m, None, 1.0, -1.0, 1e-2, 10_000)
    part = info.value.partial
    assert isinstance(part, Trajectory) and not part.complete
    assert np.all(part.x > 0) and np.all(np.diff(part.t) > 0)
    assert len(part) >= 2


@pytest.mark.parametrize("kwargs", [{"dt": 0.0}, {"dt": -1e-3}, {"steps": -1}, {"x0": -1.0}])
def test_argument_checks(kwargs):
    m, _, _ = builtin("power_law", {"sigma": 2.0})
    args = {"x0": 1.0, "v0": 0.0, "dt": 1e-3, "steps": 10} | kwargs
    with pytest.raises(ValueError):
        integrate(m, None, **args)


# ---------------------------------------------------------------- plumbing


def test_energy_and_pseudo_momentum_definitions():
    m = MassProfile.from_expression("2+x^2")
    V = oscillator_V()
    assert energy(m, V, 1.0, 2.0) == pytest.approx(0.5 * 3 * 4 + 0.5)
    assert energy(m, None, 1.0, 2.0) == pytest.approx(6.0)
    assert pseudo_momentum(m, 1.0, 2.0) == pytest.approx(2 * math.sqrt(3))


def test_csv_export():
    const, _, _ = builtin("constant")
    traj = integrate(const, oscillator_V(), 1.0, 0.0, 0.1, 3)
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,x,v,energy,pseudo_momentum"
    assert len(lines) == 5
    row = [float(c) for c in lines[2].split(",")]
    assert row[:3] == [traj.t[1], traj.x[1], traj.v[1]]


def test_iteration_yields_points():
    const, _, _ = builtin("constant")
    traj = integrate(const, None, 0.0, 1.0, 0.5, 2)
    pts = list(traj)
    assert [p.t for p in pts] == [0.0, 0.5, 1.0]
    assert pts[2].x == pytest.approx(1.0)
