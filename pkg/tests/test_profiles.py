import math
import warnings

import numpy as np
import pytest

from pdmho.cli import default_bounds
from pdmho.coord import build_map, build_map_for
from pdmho.expr import Compiled
from pdmho.profiles import (
    BUILTINS,
    DeformationProfile,
    MassProfile,
    PositivityError,
    ProfileError,
    builtin,
    default_anchor,
    deformation_from_mass,
    deformed_potential,
    mass_from_deformation,
)

NONTRIVIAL = [b for b in BUILTINS if b != "constant"]


def probes(name, mass, n=200, window=(-5.0, 5.0)):
    a, b = default_bounds(mass.domain, window)
    return np.linspace(a, b, n + 2)[1:-1]


# ---------------------------------------------------------------- examples


def test_rational_cubic_values():
    m, d, c = builtin("rational_cubic", {"lambda": 1.0})
    assert m.m(1.0) == pytest.approx(0.125, rel=1e-15)
    assert c.q_closed(1.0) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    assert d.Q(1.0) == pytest.approx(0.5)


def test_constant_profile():
    m, d, c = builtin("constant")
    xs = np.linspace(-3, 3, 7)
    assert np.all(m.m(xs) == 1.0)
    assert np.all(d.Q(xs) == 1.0)
    assert np.array_equal(c.q_closed(xs), xs)


def test_power_law_sigma_two():
    m, d, c = builtin("power_law", {"lambda": 1.0, "sigma": 2.0})
    xs = np.linspace(0.1, 3, 9)
    np.testing.assert_allclose(m.m(xs), 4 * xs**2, rtol=1e-15)
    np.testing.assert_allclose(c.q_closed(xs), xs**2, rtol=1e-15)
    for omega in (1.0, 2.5):
        np.testing.assert_allclose(c.V_closed(xs, omega), 0.5 * omega**2 * xs**4, rtol=1e-14)
        np.testing.assert_allclose(deformed_potential(d, omega)(xs), 0.5 * omega**2 * xs**4, rtol=1e-14)


def test_mass_from_deformation_examples():
    xs = np.linspace(-4, 4, 41)
    d = DeformationProfile.from_expression("1/(1+lambda*x^2)", {"lambda": 0.7})
    np.testing.assert_allclose(mass_from_deformation(d).m(xs), (1 + 0.7 * xs**2) ** -3, rtol=1e-13)

    one = DeformationProfile.from_expression("1")
    np.testing.assert_allclose(mass_from_deformation(one).m(xs), 1.0, rtol=0, atol=0)

    for sigma in (1.0, 2.0, 3.0):
        d = DeformationProfile.from_expression("lambda*x^sigma", {"lambda": 1.3, "sigma": sigma},
                                               domain=(0.0, math.inf))
        xp = np.linspace(0.1, 4, 40)
        expected = (1 + sigma / 2) ** 2 * 1.3 * xp**sigma
        np.testing.assert_allclose(mass_from_deformation(d).m(xp), expected, rtol=1e-13)


def test_deformation_from_mass_examples():
    m = MassProfile.from_expression("1/(alpha^2*x^2+1)", {"alpha": 1.0})
    cm = build_map(m, 0.0, 0.0, span=(-5, 5))
    d = deformation_from_mass(m, cm)
    assert d.Q(1.0) == pytest.approx(math.asinh(1.0) ** 2, abs=1e-12)
    assert d.Q(1.0) == pytest.approx(0.776819, abs=1e-6)

    one = MassProfile.from_expression("1")
    d1 = deformation_from_mass(one, build_map(one, 0.0, 0.0, span=(-5, 5)))
    np.testing.assert_allclose(d1.Q(np.linspace(-4, 4, 9)), 1.0, atol=1e-14)

    rc = MassProfile.from_expression("(1+lambda*x^2)^(-3)", {"lambda": 1.0})
    drc = deformation_from_mass(rc, build_map(rc, 0.0, 0.0, span=(-5, 5)))
    assert drc.Q(2.0) == pytest.approx(0.2, abs=1e-12)


def test_deformation_at_origin_uses_the_removable_limit():
    m = MassProfile.from_expression("2+sin(x)")
    d = deformation_from_mass(m, build_map(m, 0.0, 0.0, span=(-3, 3)))
    assert d.Q(0.0) == pytest.approx(2.0, rel=1e-12)
    xs = np.array([-1e-3, -1e-7, 1e-9, 1e-4])
    q = build_map(m, 0.0, 0.0, span=(-3, 3)).forward(xs)
    np.testing.assert_allclose(d.Q(xs), (q / xs) ** 2, rtol=1e-9)


def test_deformation_from_mass_rejects_offset_anchor():
    m = MassProfile.from_expression("1")
    with pytest.raises(ProfileError, match="q\\(0\\)"):
        deformation_from_mass(m, build_map(m, 0.0, 0.5, span=(-2, 2)))


@pytest.mark.parametrize(
    "Q_text, omega, x, expected",
    [("1/(1+lambda*x^2)", 1.0, 1.0, 0.25), ("1", 2.0, 1.0, 2.0)],
)
def test_deformed_potential_examples(Q_text, omega, x, expected):
    d = DeformationProfile.from_expression(Q_text, {"lambda": 1.0})
    assert deformed_potential(d, omega)(x) == pytest.approx(expected, rel=1e-15)


def test_morse_potential_at_origin():
    # 1/2 (e^0 - 2 e^0) = -1/2; the printed potential is an entire function of x
    _, _, c = builtin("morse", {"lambda": 1.0, "beta": 1.0})
    assert c.V_closed(0.0, 1.0) == pytest.approx(-0.5, rel=1e-15)


def test_deformed_potential_derivative():
    _, d, _ = builtin("rational_cubic", {"lambda": 0.3})
    V = deformed_potential(d, 1.7)
    xs = np.linspace(-3, 3, 13)
    h = 1e-6
    np.testing.assert_allclose(V.prime(xs), (V(xs + h) - V(xs - h)) / (2 * h), rtol=1e-7, atol=1e-9)


# ------------------------------------------------------------------ errors


def test_unknown_builtin():
    with pytest.raises(ProfileError, match="unknown built-in"):
        builtin("harmonic")


def test_unknown_parameter():
    with pytest.raises(ProfileError, match="does not take"):
        builtin("constant", {"lambda": 1.0})


@pytest.mark.parametrize("sigma", [-2.0, 0.0])
def test_power_law_excluded_exponents(sigma):
    with pytest.raises(ProfileError):
        builtin("power_law", {"sigma": sigma})


def test_power_law_non_natural_sigma_warns():
    with pytest.warns(UserWarning, match="natural"):
        builtin("power_law", {"sigma": 1.5})
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        builtin("power_law", {"sigma": 3.0})


def test_yukawa_sign_is_enforced():
    with pytest.raises(ProfileError, match="V0"):
        builtin("yukawa", {"V0": 1.0})


def test_mass_positivity_is_validated():
    with pytest.raises(PositivityError) as info:
        MassProfile.from_expression("x")
    assert info.value.x is not None and info.value.x <= 0
    with pytest.raises(PositivityError, match="anywhere"):
        MassProfile.from_expression("-1-x^2")


def test_mass_from_deformation_trims_to_the_bracket_sign():
    # 1 + x Q'/(2Q) = 1 - 2x^2/(1+2x^2)*... vanishes at |x| = 1 for Q = 1/(1+x^2)^2
    d = DeformationProfile.from_expression("1/(1+x^2)^2")
    m = mass_from_deformation(d)
    lo, hi = m.domain
    assert lo == pytest.approx(-1.0, abs=1e-9) and hi == pytest.approx(1.0, abs=1e-9)
    xs = np.linspace(-0.99, 0.99, 50)
    assert np.all(m.m(xs) > 0)


# -------------------------------------------------------------- properties


@pytest.mark.parametrize("name", BUILTINS)
def test_builtin_domain_validity(name):
    m, d, _ = builtin(name)
    xs = probes(name, m, 512, window=(-100.0, 100.0))
    with np.errstate(all="ignore"):
        mv, Qv = m.m(xs), d.Q(xs)
    assert np.all(mv > 0)
    assert np.all(Qv > 0)


@pytest.mark.parametrize("name", BUILTINS)
def test_m_prime_matches_finite_difference(name):
    m, _, _ = builtin(name)
    xs = probes(name, m, 100)
    h = 1e-6 * np.maximum(1.0, np.abs(xs))
    fd = (m.m(xs + h) - m.m(xs - h)) / (2 * h)
    np.testing.assert_allclose(m.m_prime(xs), fd, rtol=1e-6, atol=1e-10)


@pytest.mark.parametrize("name", BUILTINS)
def test_deformation_mass_identity(name):
    m, d, _ = builtin(name)
    xs = probes(name, m)
    lhs = np.sqrt(m.m(xs))
    rhs = np.sqrt(d.Q(xs)) * d.bracket(xs)
    assert np.max(np.abs(lhs - np.abs(rhs))) <= 1e-8
    assert np.all(np.sign(rhs) == d.orientation)


@pytest.mark.parametrize("name", BUILTINS)
def test_closed_form_derivative_is_sqrt_m(name):
    m, _, c = builtin(name)
    xs = probes(name, m)
    qp = c.q_closed.prime(xs)
    np.testing.assert_allclose(c.orientation * qp, np.sqrt(m.m(xs)), rtol=1e-8, atol=1e-8)


@pytest.mark.parametrize("name", BUILTINS)
def test_round_trip_deformation_mass_deformation(name):
    m, d, _ = builtin(name)
    m2 = mass_from_deformation(d)
    xs = probes(name, m2)
    span = (xs[0], xs[-1])
    x0, q0 = default_anchor(m2, d, None, span)
    cm = build_map(m2, x0, q0, span=span)
    d2 = deformation_from_mass(m2, cm)
    Q, Q2 = d.Q(xs), d2.Q(xs)
    assert np.max(np.abs(Q2 - Q) / np.maximum(1.0, np.abs(Q))) <= 1e-8


@pytest.mark.parametrize("name", ["asinh_log", "log_ratio"])
def test_offset_shifts_the_map(name):
    m, d, c = builtin(name, {"alpha": 1.0, "offset": 0.3})
    assert m.domain[0] == 0.0
    xs = probes(name, m)
    cm = build_map_for(m, d, c, (xs[0], xs[-1]))
    np.testing.assert_allclose(cm.forward(xs), c.orientation * c.q_closed(xs), atol=1e-8)
    np.testing.assert_allclose(d.Q(xs), (c.q_closed(xs) / xs) ** 2, rtol=1e-10)


def test_profiles_are_immutable():
    m, _, _ = builtin("rational_cubic")
    with pytest.raises(Exception):
        m.domain = (0, 1)


def test_custom_compiled_profile_round_trip():
    m = MassProfile(Compiled("exp(-x^2)+1"), Compiled("exp(-x^2)+1").prime)
    assert m.m(0.0) == 2.0
    assert m.contains(np.array([0.0]))[0]
