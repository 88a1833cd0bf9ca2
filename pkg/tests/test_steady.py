import math

import numpy as np
import pytest
from scipy.integrate import quad

from steadypop.errors import HypothesisViolation, MaxIterations, NoSignChange
from steadypop.model import Density
from steadypop.scenario import scenario_from_dict
from steadypop.spectral import net_reproduction
from steadypop.steady import (
    check_hypotheses, eigen_direction, project_to_level_set, renewal_gap, residuals,
    sample_directions, solve_steady, theta_step,
)
from steadypop.verify import random_density

from conftest import E5, make_scenario

P_STAR = 2 * (1 - E5) - 1
P0_STAR = P_STAR / (1 - E5)


@pytest.fixture(scope="module")
def gm(catalog):
    return catalog("gm_closed_form")


@pytest.fixture(scope="module")
def hier(catalog):
    sc = catalog("hierarchic_reference")
    return sc, solve_steady(sc)


def test_closed_form_values():
    assert P_STAR == pytest.approx(0.9865241, abs=1e-7)
    assert P0_STAR == pytest.approx(0.9932163, abs=1e-7)


def test_eigen_direction_calibrated():
    beta0 = 1.0 / (1 - E5)
    sc = make_scenario(beta=beta0, n=4000)
    v = eigen_direction(Density.uniform(sc.grid), sc)
    exact = np.exp(-sc.grid.nodes) / (1 - E5)
    assert np.max(np.abs(v.values - exact)) <= sc.grid.h ** 2
    assert v.total() == pytest.approx(1.0, rel=1e-14)


def test_eigen_direction_linear_ignores_scale():
    sc = make_scenario(beta=1.5, mu=0.0, n=200)
    u = Density.uniform(sc.grid)
    v = eigen_direction(u, sc)
    assert np.array_equal(v.values, eigen_direction(3.0 * u, sc).values)
    assert np.all(v.values > 0) and np.all(np.diff(v.values) < 0)


def test_projection_gm(gm):
    rng = np.random.default_rng(1)
    for _ in range(5):
        d = random_density(rng, gm.grid, scale=1.0)
        proj = project_to_level_set(d, gm)
        assert abs(proj.alpha_star - P_STAR) <= 1e-6
        assert proj.residual <= 1e-10
        lo, hi = gm.solver.alpha_bracket
        assert lo <= proj.alpha_star <= hi


def test_projection_linear():
    sc = make_scenario(n=100)
    with pytest.raises(NoSignChange):
        project_to_level_set(Density.uniform(sc.grid), sc)


def test_projection_without_root():
    sc = make_scenario(kind="gurtin_mccamy", beta="0.5/(1+x)", n=100, mu0=1.0,
                       beta_monotonicity="decreasing")
    with pytest.raises(NoSignChange) as info:
        project_to_level_set(Density.uniform(sc.grid), sc)
    assert len(info.value.endpoints) == 2


def test_projection_hierarchic_oracle(catalog):
    sc = catalog("hierarchic_reference")
    # uniform direction: F1 = (m - a)/m exactly, so pi has a closed form
    integral, _ = quad(lambda a: math.exp(-(2 * a - a * a / 10)), 0.0, 5.0, epsabs=1e-14)
    alpha_exact = 2 * integral - 1
    proj = project_to_level_set(Density.uniform(sc.grid), sc)
    assert abs(proj.alpha_star - alpha_exact) <= 1e-5


def test_single_sign_change_along_ray(catalog):
    sc = catalog("hierarchic_reference").with_n(400)
    d = Density.uniform(sc.grid)
    alphas = np.geomspace(1e-3, 1e3, 400)
    signs = np.sign([net_reproduction(a * d, sc) - 1 for a in alphas])
    assert np.count_nonzero(np.diff(signs)) == 1


def test_theta_gm_one_step(gm):
    rng = np.random.default_rng(2)
    u = project_to_level_set(random_density(rng, gm.grid, scale=1.0), gm).density
    p = theta_step(u, gm)
    exact = P0_STAR * np.exp(-gm.grid.nodes)
    assert gm.grid.h * np.sum(np.abs(p.values - exact)) <= 1e-5


def test_theta_fixed_point(hier):
    sc, res = hier
    again = theta_step(res.density, sc)
    assert (again - res.density).norm1() <= 10 * sc.solver.tol * res.density.norm1()


def test_solve_gm(gm):
    res = solve_steady(gm)
    assert abs(res.total - P_STAR) <= 1e-5
    exact = P0_STAR * np.exp(-gm.grid.nodes)
    assert gm.grid.h * np.sum(np.abs(res.density.values - exact)) <= 1e-5
    assert res.iterations <= 50
    assert max(res.residual_boundary, res.residual_profile) <= 1e-7
    assert abs(res.net_reproduction_at_solution - 1) <= 1e-7
    assert np.all(res.density.values > 0)
    assert len(res.l1_step_norms) == res.iterations


def test_solve_hierarchic_self_consistent(hier):
    sc, res = hier
    assert renewal_gap(res.density, sc) <= 1e-6
    assert abs(net_reproduction(res.density, sc) - 1) <= 1e-8
    r = residuals(res.density, sc)
    assert max(r.boundary, r.profile, r.r_gap) <= 1e-6
    assert np.all(res.density.values > 0)


def test_solve_damped_matches(catalog, hier):
    sc, res = hier
    spec = dict(sc.spec, solver={"omega": 0.6}, n=1000)
    damped = solve_steady(scenario_from_dict(spec))
    plain = solve_steady(sc.with_n(1000))
    assert (damped.density - plain.density).norm1() <= 1e-7 * plain.density.norm1()


def test_solve_max_iterations(catalog):
    spec = dict(catalog("hierarchic_reference").spec, n=200, solver={"max_iter": 2})
    with pytest.raises(MaxIterations):
        solve_steady(scenario_from_dict(spec))


def test_scale_consistency(catalog):
    sc = catalog("hierarchic_reference")
    sols = {n: solve_steady(sc.with_n(n)).density for n in (500, 1000, 2000)}
    d1 = (sols[1000] - sols[500].interpolate(sols[1000].grid)).norm1()
    d2 = (sols[2000] - sols[1000].interpolate(sols[2000].grid)).norm1()
    assert d1 <= 10 * sols[500].grid.h
    assert d2 < d1


def test_increasing_regime(catalog):
    sc = catalog("increasing_beta")
    assert check_hypotheses(sc).ok
    res = solve_steady(sc)
    assert abs(res.net_reproduction_at_solution - 1) <= 1e-7
    lo, hi = sc.solver.alpha_bracket
    assert lo <= res.total <= hi


def test_linear_kind():
    with pytest.raises(HypothesisViolation):
        solve_steady(make_scenario(n=200))
    sc = make_scenario(beta=1.0 / (1 - E5), n=20000)
    res = solve_steady(sc)
    assert res.warnings and res.total == pytest.approx(1.0, rel=1e-12)


def test_residual_examples(gm):
    exact = Density(gm.grid, P0_STAR * np.exp(-gm.grid.nodes))
    r = residuals(exact, gm)
    assert max(r.boundary, r.profile, r.r_gap) <= 5 * gm.grid.h
    lin = make_scenario(n=100)
    r = residuals(Density(lin.grid, np.ones(lin.grid.n)), lin)
    assert r.r_gap == pytest.approx(2 * (1 - E5) - 1, abs=1e-3)


def test_hypotheses(catalog):
    rep = check_hypotheses(catalog("hierarchic_reference"))
    assert rep.ok and rep.regime == "decreasing"
    spec = dict(catalog("hierarchic_reference").spec, n=100)
    spec.pop("saturation_K")
    assert check_hypotheses(scenario_from_dict(spec)).ok
    bad_k = check_hypotheses(scenario_from_dict(dict(spec, saturation_K=0.5)))
    assert any("K = 0.5" in f for f in bad_k.failures)
    no_mu0 = check_hypotheses(scenario_from_dict(dict(spec, mu0=0.0)))
    assert any("mu0" in f for f in no_mu0.failures)
    undeclared = dict(spec)
    undeclared.pop("beta_monotonicity")
    assert not check_hypotheses(scenario_from_dict(undeclared)).ok
    weak = check_hypotheses(scenario_from_dict(dict(spec, beta={"expr": "0.5/(1+x)"})))
    assert any("cannot invade" in f for f in weak.failures)
    with pytest.raises(HypothesisViolation) as info:
        solve_steady(scenario_from_dict(dict(spec, beta={"expr": "0.5/(1+x)"})))
    assert info.value.failures


def test_irreducibility_is_a_warning(catalog):
    spec = dict(catalog("hierarchic_reference").spec, n=400, beta={"expr": "2*min(1, 4*(5-a))/(1+x)"})
    sc = scenario_from_dict(spec)
    rep = check_hypotheses(sc)
    assert rep.ok and rep.warnings
    assert solve_steady(sc).warnings


def test_sample_directions(gm):
    for d in sample_directions(gm.grid):
        assert d.total() == pytest.approx(1.0, rel=1e-14) and np.all(d.values > 0)
