import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from steadypop.errors import ScenarioError, ZeroPopulation
from steadypop.model import (
    AgeGrid, Density, ModelKind, Monotonicity, RateFunction, VitalRates, environment_profiles,
    extinction_profiles, f1_hierarchy, f2_total, integrate, survival,
)

from conftest import E5


def test_grid_basics():
    g = AgeGrid(5.0, 4000)
    assert abs(g.h * g.n - g.m) <= np.spacing(g.m)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] > 0 and g.nodes[-1] < g.m
    assert g.refine(100).n == 100
    with pytest.raises(ValueError):
        AgeGrid(5.0, 1)
    with pytest.raises(ValueError):
        AgeGrid(-1.0, 10)


def test_density_grid_mismatch():
    a = Density(AgeGrid(5.0, 10), np.ones(10))
    b = Density(AgeGrid(5.0, 20), np.ones(20))
    with pytest.raises(ValueError):
        a + b
    with pytest.raises(ValueError):
        Density(AgeGrid(5.0, 10), np.ones(11))


def test_density_is_immutable():
    d = Density(AgeGrid(1.0, 4), np.ones(4))
    with pytest.raises((AttributeError, ValueError)):
        d.values[0] = 3.0
    with pytest.raises(AttributeError):
        d.values = np.zeros(4)


@pytest.mark.parametrize("m, n, func, expected", [
    (5.0, 100, lambda a: np.ones_like(a), 5.0),
    (5.0, 100, lambda a: np.zeros_like(a), 0.0),
    (2.0, 4, lambda a: a, 2.0),
])
def test_integrate_examples(m, n, func, expected):
    assert integrate(Density.from_function(AgeGrid(m, n), func)) == pytest.approx(expected, rel=1e-15, abs=0)


def test_f2_total_examples():
    g = AgeGrid(5.0, 4000)
    assert f2_total(3.0 * Density.from_function(g, np.ones_like)) == pytest.approx(15.0, rel=1e-14)
    assert f2_total(Density(g, np.zeros(g.n))) == 0.0
    assert abs(f2_total(Density.from_function(g, lambda a: np.exp(-a))) - (1 - E5)) <= 1e-6


def test_f1_uniform():
    g = AgeGrid(5.0, 50)
    q = f1_hierarchy(Density(g, np.full(g.n, 0.7)))
    np.testing.assert_allclose(q.values, (5.0 - g.nodes) / 5.0, rtol=1e-13, atol=1e-15)


def test_f1_last_cell():
    g = AgeGrid(5.0, 10)
    v = np.zeros(g.n)
    v[-1] = 3.0
    q = f1_hierarchy(Density(g, v)).values
    assert np.all(q[:-1] == 1.0)
    assert q[-1] == 0.5


def test_f1_zero_population():
    g = AgeGrid(5.0, 10)
    with pytest.raises(ZeroPopulation):
        f1_hierarchy(Density(g, np.zeros(g.n)))
    with pytest.raises(ZeroPopulation):
        f1_hierarchy(Density(g, np.full(g.n, 1e-302)))


positive_values = arrays(np.float64, st.integers(2, 60),
                         elements=st.floats(0.0, 1e3, allow_subnormal=False))


@settings(max_examples=200, deadline=None)
@given(positive_values, st.integers(-20, 20))
def test_f1_ray_invariance_power_of_two(values, k):
    assume(values.sum() > 1e-6)
    g = AgeGrid(5.0, values.size)
    u = Density(g, values)
    alpha = 2.0 ** k
    assert np.array_equal(f1_hierarchy(alpha * u).values, f1_hierarchy(u).values)


@settings(max_examples=200, deadline=None)
@given(positive_values, st.floats(1e-3, 1e3))
def test_f1_ray_invariance_any_alpha(values, alpha):
    assume(values.sum() > 1e-6)
    g = AgeGrid(5.0, values.size)
    u = Density(g, values)
    q1 = f1_hierarchy(alpha * u).values
    q0 = f1_hierarchy(u).values
    # alpha * u is itself rounded, so only the summation error bound holds
    eps = np.finfo(float).eps
    assert np.all(np.abs(q1 - q0) <= (values.size + 2) * eps * q0 + 1e-290)


@settings(max_examples=200, deadline=None)
@given(positive_values)
def test_f1_shape(values):
    assume(values.sum() > 1e-6)
    q = f1_hierarchy(Density(AgeGrid(3.0, values.size), values)).values
    assert np.all(q >= 0) and np.all(q <= 1)
    assert np.all(np.diff(q) <= 0)


@settings(max_examples=200, deadline=None)
@given(positive_values, st.floats(1e-3, 1e3))
def test_f2_scaling(values, alpha):
    u = Density(AgeGrid(2.0, values.size), values)
    assert f2_total(alpha * u) == pytest.approx(alpha * f2_total(u), rel=1e-14, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 40).flatmap(lambda n: st.tuples(
    arrays(np.float64, n, elements=st.floats(-1e3, 1e3)),
    arrays(np.float64, n, elements=st.floats(-1e3, 1e3)))),
    st.floats(-10, 10), st.floats(-10, 10))
def test_integrate_linear(uv, a, b):
    u_vals, v_vals = uv
    g = AgeGrid(4.0, u_vals.size)
    u, v = Density(g, u_vals), Density(g, v_vals)
    lhs = integrate(a * u + b * v)
    rhs = a * integrate(u) + b * integrate(v)
    scale = abs(a) * integrate(Density(g, np.abs(u_vals))) + abs(b) * integrate(Density(g, np.abs(v_vals)))
    assert abs(lhs - rhs) <= 1e-13 * max(scale, 1e-300)


def test_survival_examples():
    g = AgeGrid(5.0, 4000)
    q = Density(g, (5.0 - g.nodes) / 5.0)
    pi = survival(q, RateFunction.constant(1.0)).values
    assert np.max(np.abs(pi - np.exp(-g.nodes))) <= g.h ** 2
    assert np.all(survival(q, RateFunction.constant(0.0)).values == 1.0)
    pi = survival(q, RateFunction.from_expr("1+x")).values
    exact = np.exp(-(2 * g.nodes - g.nodes ** 2 / 10))
    assert np.max(np.abs(pi - exact)) <= 2 * g.h ** 2
    assert pi[-1] == pytest.approx(math.exp(-7.5), rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 3), st.floats(0, 1), st.floats(0, 2), positive_values)
def test_survival_range(c0, c1, c2, values):
    assume(values.sum() > 1e-6)
    g = AgeGrid(5.0, values.size)
    q = f1_hierarchy(Density(g, values))
    mu = RateFunction.from_family("linear", {"c0": c0, "c1": c1, "c2": c2})
    pi = survival(q, mu).values
    assert np.all(pi > 0) and np.all(pi <= 1)
    assert np.all(np.diff(pi) <= 0)


def test_rate_constant_extension():
    r = RateFunction.from_expr("2/(1+x)")
    assert r(1.0, -0.5) == r(1.0, 0.0) == 2.0
    assert np.all(r(np.zeros(3), np.array([-3.0, -1e-9, 0.0])) == 2.0)
    assert r.scalar(0.0, -4.0) == 2.0


@pytest.mark.parametrize("family, params, x, expected", [
    ("constant", {"value": 3.0}, 7.0, 3.0),
    ("hyperbolic", {"value": 2.0, "k": 1.0}, 1.0, 1.0),
    ("saturating", {"value": 4.0, "k": 1.0}, 1.0, 2.0),
    ("exponential", {"value": 2.0, "k": 1.0}, 0.0, 2.0),
    ("linear", {"c0": 1.0, "c1": 0.0, "c2": 2.0}, 0.5, 2.0),
])
def test_families(family, params, x, expected):
    assert RateFunction.from_family(family, params).scalar(1.0, x) == pytest.approx(expected)


def test_family_errors():
    with pytest.raises(ScenarioError):
        RateFunction.from_family("cubic", {})
    with pytest.raises(ScenarioError):
        RateFunction.from_family("hyperbolic", {"k": 1.0})
    with pytest.raises(ScenarioError):
        RateFunction.from_family("constant", {"value": 1.0, "slope": 2.0})


def test_depends_on_environment():
    assert not RateFunction.constant(1.0).depends_on_environment
    assert RateFunction.from_expr("1+x").depends_on_environment


def _rates(kind, beta="2/(1+x)", mu="1+x", mono="decreasing", mu0=1.0):
    return VitalRates(beta=RateFunction.from_expr(beta), mu=RateFunction.from_expr(mu),
                      mu0=mu0, beta_monotonicity=mono, model_kind=kind)


def test_environment_profiles_examples():
    g = AgeGrid(5.0, 50)
    u = Density(g, np.ones(g.n))
    mort, fert = environment_profiles(3.0 * u, _rates(ModelKind.LINEAR))
    assert np.all(mort.values == 1.0) and np.all(fert.values == 2.0)
    mort, fert = environment_profiles(u, _rates(ModelKind.GURTIN_MCCAMY, mu="1"))
    np.testing.assert_allclose(fert.values, 1.0 / 3.0, rtol=1e-15)
    mort, fert = environment_profiles(u, _rates(ModelKind.HIERARCHIC))
    np.testing.assert_allclose(mort.values, 1.0 + (5.0 - g.nodes) / 5.0, rtol=1e-14)
    np.testing.assert_allclose(fert.values, 1.0 / 3.0, rtol=1e-15)
    with pytest.raises(ZeroPopulation):
        environment_profiles(0.0 * u, _rates(ModelKind.HIERARCHIC))
    mort, fert = extinction_profiles(g, _rates(ModelKind.HIERARCHIC))
    assert np.all(mort.values == 1.0) and np.all(fert.values == 2.0)


def test_diagnostics():
    assert _rates(ModelKind.HIERARCHIC).diagnostics(5.0) == []
    problems = _rates(ModelKind.GURTIN_MCCAMY, beta="2*x").diagnostics(5.0)
    assert any(p.startswith("beta declared decreasing") for p in problems)
    problems = _rates(ModelKind.GURTIN_MCCAMY, mono="increasing").diagnostics(5.0)
    assert any(p.startswith("beta declared increasing") for p in problems)
    problems = _rates(ModelKind.GURTIN_MCCAMY, mu="0.5").diagnostics(5.0)
    assert any("below declared mu0" in p for p in problems)
    assert _rates(ModelKind.GURTIN_MCCAMY, mono="none").beta_monotonicity is Monotonicity.NONE
