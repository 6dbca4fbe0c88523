import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import q_by_quad
from pdmho.cli import default_bounds
from pdmho.coord import (
    CoordinateRangeError,
    Grid,
    QuadratureError,
    adaptive_simpson,
    build_map,
    build_map_for,
    invert,
)
from pdmho.profiles import BUILTINS, MassProfile, builtin


def probes(mass, n=200, window=(-5.0, 5.0)):
    a, b = default_bounds(mass.domain, window)
    return np.linspace(a, b, n + 2)[1:-1]


@pytest.fixture(scope="module")
def rc_map():
    m, _, _ = builtin("rational_cubic", {"lambda": 1.0})
    return build_map(m, 0.0, 0.0, span=(-10, 10))


@pytest.fixture(scope="module")
def const_map():
    m, _, _ = builtin("constant")
    return build_map(m, 0.0, 0.0, span=(-10, 10))


# ---------------------------------------------------------------- examples


def test_grid_uniform():
    g = Grid.uniform(-1.0, 1.0, 5)
    assert g.n == 5 and len(g) == 5
    assert g.h == 0.5
    assert g.bounds == (-1.0, 1.0)
    assert g.label == "x"


@pytest.mark.parametrize("args", [(1.0, 0.0, 10), (0.0, 1.0, 1)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(ValueError):
        Grid.uniform(*args)


def test_grid_rejects_non_uniform_points():
    with pytest.raises(ValueError, match="uniform"):
        Grid(np.array([0.0, 1.0, 3.0]), 1.0)


def test_rational_cubic_forward(rc_map):
    assert rc_map.forward(1.0) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_constant_forward_is_identity(const_map):
    xs = np.linspace(-9, 9, 37)
    np.testing.assert_allclose(const_map.forward(xs), xs, atol=1e-12)


def test_asinh_log_forward():
    m, _, _ = builtin("asinh_log", {"alpha": 2.0})
    cm = build_map(m, 0.0, 0.0, span=(-5, 5))
    assert cm.forward(1.0) == pytest.approx(math.asinh(2.0) / 2, abs=1e-12)
    assert cm.forward(1.0) == pytest.approx(0.7218, abs=1e-4)


def test_invert_examples(rc_map, const_map):
    assert rc_map.invert(1 / math.sqrt(2)) == pytest.approx(1.0, abs=1e-9)
    for q in (-3.3, 0.0, 0.5, 7.25):
        assert invert(const_map, q) == pytest.approx(q, abs=1e-10)


def test_invert_outside_bounded_range(rc_map):
    lo, hi = rc_map.q_range()
    assert lo == pytest.approx(-1.0, abs=1e-4) and hi == pytest.approx(1.0, abs=1e-4)
    assert not rc_map.onto_real
    with pytest.raises(CoordinateRangeError):
        rc_map.invert(1.1)


def test_onto_real_for_asinh_log():
    m, _, _ = builtin("asinh_log", {"alpha": 0.1})
    cm = build_map(m, 0.0, 0.0, span=(-20, 20))
    assert cm.onto_real
    lo, hi = cm.q_range()
    assert math.isinf(lo) and math.isinf(hi)


def test_forward_outside_domain_is_rejected():
    m, _, _ = builtin("power_law", {"sigma": 2.0})
    cm = build_map(m, 1.0, 1.0, span=(0.5, 4))
    with pytest.raises(CoordinateRangeError):
        cm.forward(-1.0)


def test_anchor_outside_domain_is_rejected():
    m, _, _ = builtin("power_law", {"sigma": 2.0})
    with pytest.raises(Exception, match="anchor"):
        build_map(m, -1.0, 0.0, span=(0.5, 4))


def test_singular_integrand_reports_the_subinterval():
    with pytest.raises(QuadratureError) as info, np.errstate(divide="ignore"):
        adaptive_simpson(lambda x: 1.0 / np.sqrt(np.abs(x - 0.3)), np.array([0.0]), np.array([1.0]), 1e-10)
    a, b = info.value.interval
    assert a <= 0.3 <= b


def test_mass_failure_inside_quadrature_becomes_quadrature_error():
    # sqrt(exp(x)) overflows long before x = 1500
    m = MassProfile.from_expression("exp(x)")
    cm = build_map(m, 0.0, 0.0, span=(-1, 1))
    with pytest.raises(QuadratureError, match="mass profile failed"):
        cm.forward(1500.0)


def test_adaptive_simpson_polynomial_is_exact():
    a = np.array([0.0, -1.0])
    b = np.array([2.0, 3.0])
    got = adaptive_simpson(lambda x: x**3 - x, a, b, 1e-12)
    np.testing.assert_allclose(got, [2.0, 16.0], rtol=1e-14)


# -------------------------------------------------------------- properties


CLOSED = [b for b in BUILTINS]


@pytest.mark.parametrize("name", CLOSED)
def test_forward_matches_closed_form(name):
    m, d, c = builtin(name)
    xs = probes(m)
    cm = build_map_for(m, d, c, (xs[0], xs[-1]))
    ref = c.orientation * c.q_closed(xs)
    err = np.abs(cm.forward(xs) - ref) / np.maximum(1.0, np.abs(ref))
    assert np.max(err) <= 1e-8


@pytest.mark.parametrize("name", ["rational_cubic", "asinh_log", "power_law", "morse"])
def test_forward_matches_quadpack(name):
    m, d, c = builtin(name)
    xs = probes(m, 15)
    x0, q0 = xs[7], 0.25
    cm = build_map(m, x0, q0, span=(xs[0], xs[-1]))
    for x in xs:
        ref = q_by_quad(m.sqrt_m, x0, q0, x)
        assert cm.forward(x) == pytest.approx(ref, abs=1e-9, rel=1e-10)


@pytest.mark.parametrize("name", BUILTINS)
def test_anchor_is_exact(name):
    m, d, c = builtin(name)
    xs = probes(m)
    x0 = float(xs[37])
    cm = build_map(m, x0, -1.5, span=(xs[0], xs[-1]))
    assert cm.forward(x0) == -1.5


_profiles = st.sampled_from(["rational_cubic", "asinh_log", "log_ratio", "power_law", "yukawa"])


@settings(max_examples=60)
@given(_profiles, st.lists(st.floats(0.001, 0.999), min_size=2, max_size=30, unique=True))
def test_forward_is_strictly_increasing(name, fractions):
    m, d, c = builtin(name)
    a, b = default_bounds(m.domain, (-5.0, 5.0))
    cm = build_map_for(m, d, c, (a, b))
    xs = a + (b - a) * np.sort(np.array(fractions))
    assert np.all(np.diff(cm.forward(xs)) > 0)


@settings(max_examples=60)
@given(_profiles, st.floats(0.01, 0.99))
def test_inverse_of_forward(name, frac):
    m, d, c = builtin(name)
    a, b = default_bounds(m.domain, (-5.0, 5.0))
    cm = build_map_for(m, d, c, (a, b))
    x = a + (b - a) * frac
    q = cm.forward(x)
    back = cm.invert(q)
    assert back == pytest.approx(x, abs=1e-9)
    assert abs(cm.forward(back) - q) <= 1e-10 * max(1.0, abs(q))


@settings(max_examples=60)
@given(_profiles, st.floats(0.02, 0.98))
def test_derivative_of_forward_is_sqrt_m(name, frac):
    m, d, c = builtin(name)
    a, b = default_bounds(m.domain, (-5.0, 5.0))
    cm = build_map_for(m, d, c, (a, b))
    x = a + (b - a) * frac
    h = 1e-4 * max(1.0, abs(x))
    fd = (cm.forward(x + h) - cm.forward(x - h)) / (2 * h)
    assert fd == pytest.approx(float(cm.dq_dx(x)), rel=1e-6)


def test_map_is_safe_for_concurrent_reads(rc_map):
    from concurrent.futures import ThreadPoolExecutor

    xs = np.linspace(-5, 5, 101)
    expected = rc_map.forward(xs)
    with ThreadPoolExecutor(8) as pool:
        results = list(pool.map(lambda _: rc_map.forward(xs), range(16)))
    for r in results:
        np.testing.assert_array_equal(r, expected)
