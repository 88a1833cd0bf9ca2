"""Strictly positive steady states through the level set ``{u : s(B_u) = 0}``.

A steady state is a fixed point of the map ``Theta``: take the positive
eigenvector ``V_u`` of the generator in environment ``u``, then slide along
its ray to the point ``alpha * V_u`` where the net reproduction number equals
one. Along a ray the hierarchy profile ``F1`` is constant and only the
fertility argument ``F2 = alpha`` moves, so a monotone fertility makes
``alpha -> R(alpha V) - 1`` monotone and its root unique.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._roots import bisect
from .errors import HypothesisViolation, MaxIterations, NoSignChange
from .model import (
    Density, ModelKind, Monotonicity, cumulative_hazard, environment_profiles,
)
from .spectral import Characteristic, net_reproduction, net_reproduction_extinction

__all__ = [
    "RayProjection", "SteadyStateResult", "Residuals", "HypothesisReport",
    "eigen_direction", "project_to_level_set", "theta_step", "solve_steady",
    "residuals", "renewal_gap", "check_hypotheses", "sample_directions",
]

log = logging.getLogger(__name__)

PROJECTION_TOL = 1e-10
RESIDUAL_TOL = 1e-7


@dataclass(frozen=True)
class RayProjection:
    direction: Density
    alpha_star: float
    residual: float
    bracket: tuple
    evaluations: int

    @property
    def density(self) -> Density:
        return self.alpha_star * self.direction


@dataclass(frozen=True)
class Residuals:
    boundary: float
    profile: float
    r_gap: float


@dataclass(frozen=True)
class SteadyStateResult:
    density: Density
    alpha_star: float
    iterations: int
    l1_step_norms: tuple
    residual_boundary: float
    residual_profile: float
    net_reproduction_at_solution: float
    warnings: tuple = ()

    @property
    def total(self) -> float:
        return self.density.total()


@dataclass
class HypothesisReport:
    regime: str
    failures: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def eigen_direction(u: Density, scenario) -> Density:
    """Unit-mass positive eigenvector ``exp(-s a) pi(a)`` of the generator at ``u``."""
    char = Characteristic.for_density(u, scenario)
    s, _, _ = char.dominant_root()
    log_v = -(s * u.grid.nodes + char.hazard)
    v = np.exp(log_v - np.max(log_v))
    return Density(u.grid, v).normalized()


def _ray_function(direction, scenario):
    def gap(alpha):
        return net_reproduction(alpha * direction, scenario) - 1.0
    return gap


def project_to_level_set(direction: Density, scenario, bracket=None) -> RayProjection:
    """Scale ``direction`` so that the net reproduction number equals one.

    The search starts at ``alpha = 1`` (clipped into the bracket) and doubles
    or halves toward the root as the declared monotonicity of fertility
    dictates, then bisects.
    """
    if np.any(direction.values < 0):
        raise ValueError("direction must be nonnegative")
    d = direction.normalized()
    lo_lim, hi_lim = bracket or scenario.solver.alpha_bracket
    gap = _ray_function(d, scenario)
    mono = scenario.rates.beta_monotonicity
    evaluations = 0

    def g(alpha):
        nonlocal evaluations
        evaluations += 1
        return gap(alpha)

    if mono is Monotonicity.NONE:
        grid = np.geomspace(lo_lim, hi_lim, 33)
        values = [g(a) for a in grid]
        for k in range(len(grid) - 1):
            if values[k] == 0 or values[k] * values[k + 1] < 0:
                lo, hi, g_lo, g_hi = grid[k], grid[k + 1], values[k], values[k + 1]
                break
        else:
            raise NoSignChange(
                f"R(alpha d) - 1 keeps one sign on [{lo_lim:g}, {hi_lim:g}]: "
                f"{values[0]:.6g} .. {values[-1]:.6g}", (values[0], values[-1]))
    else:
        # sign of g that means "root lies at larger alpha"
        upward = 1.0 if mono is Monotonicity.DECREASING else -1.0
        alpha = min(max(1.0, lo_lim), hi_lim)
        g_alpha = g(alpha)
        lo = hi = alpha
        g_lo = g_hi = g_alpha
        if g_alpha * upward > 0:
            while g_hi * upward > 0:
                if hi >= hi_lim:
                    raise NoSignChange(
                        f"R(alpha d) - 1 keeps one sign on [{alpha:g}, {hi_lim:g}]: "
                        f"{g_alpha:.6g} .. {g_hi:.6g}", (g_alpha, g_hi))
                lo, g_lo = hi, g_hi
                hi = min(2.0 * hi, hi_lim)
                g_hi = g(hi)
        elif g_alpha * upward < 0:
            while g_lo * upward < 0:
                if lo <= lo_lim:
                    raise NoSignChange(
                        f"R(alpha d) - 1 keeps one sign on [{lo_lim:g}, {alpha:g}]: "
                        f"{g_lo:.6g} .. {g_alpha:.6g}", (g_lo, g_alpha))
                hi, g_hi = lo, g_lo
                lo = max(0.5 * lo, lo_lim)
                g_lo = g(lo)
    root, lo, hi, _ = bisect(g, lo, hi, g_lo, g_hi, lambda x: 2e-16 * abs(x), max_iter=200)
    residual = abs(g(root))
    if residual > PROJECTION_TOL:
        raise NoSignChange(
            f"ray projection stalled with |R - 1| = {residual:.3g} at alpha = {root:.17g}",
            (g_lo, g_hi))
    return RayProjection(d, root, residual, (lo, hi), evaluations)


def theta_step(u: Density, scenario) -> Density:
    """One application of ``Theta``: eigenvector of ``B_u`` projected back to the level set."""
    return project_to_level_set(eigen_direction(u, scenario), scenario).density


def sample_directions(grid) -> list:
    """Probe directions (unit mass) used for the small- and large-ball checks."""
    ages = grid.nodes
    shapes = [np.ones_like(ages), np.exp(-ages / grid.m), np.exp(-2 * ages / grid.m),
              np.exp(-5 * ages / grid.m)]
    return [Density(grid, shape).normalized() for shape in shapes]


def check_hypotheses(scenario) -> HypothesisReport:
    """Check existence hypotheses numerically on probe lattices and directions.

    Decreasing fertility: mortality bounded below by ``mu0 > 0``, a
    saturation level ``K`` with ``max_a beta(a, K) < mu0`` and ``R > 1`` near
    the origin on the probe directions. Increasing fertility: ``R < 1`` at
    ``|u| = r`` and ``R > 1`` at ``|u| = R`` with ``[r, R]`` the scenario's
    alpha bracket. Vanishing fertility at the maximum age for some
    ``x > 0`` only warns.
    """
    rates = scenario.rates
    grid = scenario.grid
    m = grid.m
    kind = rates.model_kind
    mono = rates.beta_monotonicity

    if kind is ModelKind.LINEAR:
        report = HypothesisReport("linear")
        r0 = net_reproduction_extinction(scenario)
        if abs(r0 - 1.0) > RESIDUAL_TOL:
            report.failures.append(
                f"linear model with R = {r0:.10g} != 1: the zero state is the only steady state")
        return report

    regime = {Monotonicity.DECREASING: "decreasing", Monotonicity.INCREASING: "increasing"}.get(mono)
    report = HypothesisReport(regime or "undeclared")
    if regime is None:
        report.failures.append("fertility must be declared decreasing or increasing in the environment")
        return report
    report.failures.extend(rates.diagnostics(m))

    ages, _, env = rates.probe_lattice(m)
    # any nonzero state has a positive total, so x = 0 is never felt
    positive_env = env[env > 0]
    if np.any(rates.beta(np.full(positive_env.shape, m), positive_env) <= 0):
        report.warnings.append("beta(m, x) vanishes for some x; irreducibility is not guaranteed")

    directions = sample_directions(grid)
    lo_lim, hi_lim = scenario.solver.alpha_bracket
    if regime == "decreasing":
        if not rates.mu0 > 0:
            report.failures.append("mortality lower bound mu0 must be positive")
        else:
            k_sat = rates.saturation_K
            candidates = [k_sat] if k_sat is not None else list(np.geomspace(1e-3, 1e8, 45))
            found = [k for k in candidates if np.max(rates.beta(ages, np.full(ages.shape, k))) < rates.mu0]
            if not found:
                what = f"K = {k_sat:g}" if k_sat is not None else "any probed K"
                report.failures.append(f"max_a beta(a, K) < mu0 fails for {what}")
        for k, d in enumerate(directions):
            r_small = net_reproduction(lo_lim * d, scenario)
            if not r_small > 1.0:
                report.failures.append(
                    f"R = {r_small:.6g} <= 1 at |u| = {lo_lim:g} along probe direction {k}; "
                    "the population cannot invade")
    else:
        for k, d in enumerate(directions):
            r_small = net_reproduction(lo_lim * d, scenario)
            r_large = net_reproduction(hi_lim * d, scenario)
            if not r_small < 1.0:
                report.failures.append(f"R = {r_small:.6g} >= 1 at |u| = r = {lo_lim:g} along probe direction {k}")
            if not r_large > 1.0:
                report.failures.append(f"R = {r_large:.6g} <= 1 at |u| = R = {hi_lim:g} along probe direction {k}")
    return report


def residuals(p: Density, scenario) -> Residuals:
    """Steady-state defects of ``p``, each relative to ``||p||_1``.

    ``boundary`` compares ``p(0+)`` with the birth integral, where ``p(0+)``
    is traced back along the characteristic from the first cell centre;
    ``profile`` compares ``p`` with ``p(0+) * pi``; ``r_gap`` is ``|R(p) - 1|``.
    """
    norm = p.norm1()
    vals = p.values
    mortality, fertility = environment_profiles(p, scenario.rates)
    h = p.grid.h
    births = h * float(np.sum(fertility.values * vals))
    pi = np.exp(-cumulative_hazard(mortality.values, h))
    p0 = vals[0] / pi[0]
    return Residuals(
        boundary=abs(p0 - births) / norm,
        profile=h * float(np.sum(np.abs(vals - p0 * pi))) / norm,
        r_gap=abs(net_reproduction(p, scenario) - 1.0),
    )


def renewal_gap(p: Density, scenario) -> float:
    """``||p - B pi||_1 / ||p||_1`` with ``B = int beta p`` the birth rate.

    Zero exactly when ``p`` is its own birth rate times the survival function
    in the environment it creates.
    """
    mortality, fertility = environment_profiles(p, scenario.rates)
    h = p.grid.h
    births = h * float(np.sum(fertility.values * p.values))
    pi = np.exp(-cumulative_hazard(mortality.values, h))
    return h * float(np.sum(np.abs(p.values - births * pi))) / p.norm1()


def _finish(u, scenario, alpha, iterations, norms, warnings):
    res = residuals(u, scenario)
    r_sol = net_reproduction(u, scenario)
    worst = max(res.boundary, res.profile, abs(r_sol - 1.0))
    if not worst <= RESIDUAL_TOL:
        raise MaxIterations(
            f"iteration stopped with residuals boundary={res.boundary:.3g}, "
            f"profile={res.profile:.3g}, |R - 1|={abs(r_sol - 1):.3g}")
    return SteadyStateResult(u, alpha, iterations, tuple(norms), res.boundary, res.profile,
                             r_sol, tuple(warnings))


def solve_steady(scenario, initial: Density = None, check: bool = True) -> SteadyStateResult:
    """Damped fixed-point iteration of ``Theta`` on the level set.

    ``u_{k+1} = (1 - omega) u_k + omega Theta(u_k)``, re-projected onto the
    level set, until ``||u_{k+1} - u_k||_1 <= tol ||u_k||_1``.
    """
    report = check_hypotheses(scenario)
    if check and report.failures:
        raise HypothesisViolation(report.failures)
    warnings = list(report.warnings)
    controls = scenario.solver

    if scenario.rates.model_kind is ModelKind.LINEAR:
        # R does not depend on u: with R = 1 every multiple of pi is steady
        u = eigen_direction(Density.uniform(scenario.grid), scenario)
        warnings.append("linear model: steady states form a ray; returning the unit-mass one")
        return _finish(u, scenario, 1.0, 0, [], warnings)

    start = initial if initial is not None else scenario.initial_density()
    proj = project_to_level_set(start.normalized(), scenario)
    u, alpha = proj.density, proj.alpha_star
    norms = []
    omega = controls.omega
    for iteration in range(1, controls.max_iter + 1):
        proj = project_to_level_set(eigen_direction(u, scenario), scenario)
        if omega < 1.0:
            mixed = (1.0 - omega) * u + omega * proj.density
            proj = project_to_level_set(mixed.normalized(), scenario)
        new, alpha = proj.density, proj.alpha_star
        step = (new - u).norm1()
        norms.append(step)
        log.debug("iteration %d: step %.3e, alpha %.12g", iteration, step, alpha)
        converged = step <= controls.tol * u.norm1()
        u = new
        if converged:
            return _finish(u, scenario, alpha, iteration, norms, warnings)
    raise MaxIterations(
        f"no convergence in {controls.max_iter} iterations; last step {norms[-1]:.3e}")
