"""Randomized invariant suites.

Each suite draws scenarios from a seeded generator and checks one structural
property; draws are independent and reproducible from ``(seed, index)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import operator_lab as ol
from .errors import SteadyPopError
from .model import Density, ModelKind, Monotonicity
from .scenario import scenario_from_dict
from .spectral import Characteristic, resolvent_apply

__all__ = [
    "random_scenario", "random_density", "SUITES", "SuiteResult",
    "check_sign_equivalence", "check_ray_monotonicity", "check_split_exactness",
    "check_rank_one_spectrum", "check_resolvent_identity", "run_suites",
    "resolvent_residuals", "worker_count",
]

KINDS = (ModelKind.HIERARCHIC, ModelKind.GURTIN_MCCAMY, ModelKind.LINEAR)


def worker_count() -> int:
    cap = os.environ.get("STEADYPOP_THREADS")
    workers = os.cpu_count() or 1
    if cap:
        workers = min(workers, max(1, int(cap)))
    return workers


def _r(x):
    return repr(float(x))


def random_scenario(rng, kind=None, n=None, monotonicity=None):
    """A random admissible scenario with rate expressions in the rate language."""
    kind = ModelKind(kind) if kind is not None else KINDS[rng.integers(len(KINDS))]
    if monotonicity is None:
        monotonicity = (Monotonicity.DECREASING, Monotonicity.INCREASING)[rng.integers(2)]
    monotonicity = Monotonicity(monotonicity)
    m = rng.uniform(2.0, 10.0)
    n = int(n if n is not None else rng.integers(40, 200))
    b0 = math.exp(rng.uniform(math.log(0.1), math.log(10.0)))
    peak = rng.uniform(0.0, m)
    width = rng.uniform(0.2, 1.0) * m
    k = rng.uniform(0.2, 2.0)
    floor = rng.uniform(0.05, 0.5)
    shape = f"({_r(floor)}+exp(-((a-{_r(peak)})/{_r(width)})^2))"
    if monotonicity is Monotonicity.DECREASING:
        beta = f"{_r(b0)}*{shape}/(1+{_r(k)}*x)"
    else:
        beta = f"{_r(b0)}*{shape}*(0.1+{_r(k)}*x)/(1+{_r(k)}*x)"
    m0 = rng.uniform(0.05, 1.5)
    m1 = rng.uniform(0.0, 0.5)
    m2 = rng.uniform(0.0, 1.0)
    spec = {
        "model_kind": kind.value,
        "m": m,
        "n": n,
        "beta": {"expr": beta},
        "mu": {"expr": f"{_r(m0)}+{_r(m1)}*a+{_r(m2)}*x"},
        "mu0": m0,
        "beta_monotonicity": monotonicity.value,
    }
    return scenario_from_dict(spec)


def random_density(rng, grid, scale=None) -> Density:
    """Smooth strictly positive density with random total mass."""
    coeffs = rng.normal(0.0, 0.7, size=4)
    t = grid.nodes / grid.m
    log_shape = sum(c * np.cos((j + 1) * np.pi * t) for j, c in enumerate(coeffs))
    d = Density(grid, np.exp(log_shape)).normalized()
    if scale is None:
        scale = math.exp(rng.uniform(math.log(1e-2), math.log(1e2)))
    return scale * d


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    failures: list = field(default_factory=list)
    worst: float = 0.0

    def to_json(self):
        return {
            "passed": self.passed,
            "failed": self.failed,
            "skipped": self.skipped,
            "worst": self.worst,
            "failures": self.failures[:5],
        }


# Each check returns (status, measure, detail) with status in
# {"pass", "fail", "skip"}.

def check_sign_equivalence(rng):
    """sign(s) == sign(R - 1) for the continuum and the matrix formulations."""
    sc = random_scenario(rng)
    u = random_density(rng, sc.grid)
    char = Characteristic.for_density(u, sc)
    s, _, _ = char.dominant_root()
    r = char(0.0)
    checked = False
    if abs(r - 1.0) > 1e-6 and abs(s) > 1e-8:
        checked = True
        if (s > 0) != (r > 1):
            return "fail", abs(s), f"continuum: s={s!r}, R={r!r}"
    hat, boundary = ol.assemble_split(u, sc)
    s_h = ol.dominant_eigenvalue(ol.combine(hat, boundary))
    r_h = ol.rank_one_spectrum(hat, boundary).nonzero_rank_one_eig
    if abs(r_h - 1.0) > 1e-4 and abs(s_h) > 1e-4:
        checked = True
        if (s_h > 0) != (r_h > 1):
            return "fail", abs(s_h), f"matrix: s_h={s_h!r}, phi.w={r_h!r}"
    return ("pass" if checked else "skip"), 0.0, ""


def check_ray_monotonicity(rng):
    """Dominant eigenvalue strictly decreases along rays for decreasing fertility."""
    kind = (ModelKind.HIERARCHIC, ModelKind.GURTIN_MCCAMY)[rng.integers(2)]
    sc = random_scenario(rng, kind=kind, monotonicity="decreasing", n=int(rng.integers(30, 80)))
    u = random_density(rng, sc.grid, scale=math.exp(rng.uniform(math.log(0.1), math.log(10.0))))
    try:
        values = ol.ray_monotonicity_scan(u, [0.5, 1.0, 2.0, 4.0], sc)
    except SteadyPopError as exc:
        return "fail", 0.0, str(exc)
    return "pass", float(np.min(-np.diff(values))), ""


def check_split_exactness(rng):
    """B equals Bhat + b phi^T to one ulp."""
    sc = random_scenario(rng, n=int(rng.integers(2, 60)))
    u = random_density(rng, sc.grid)
    ulps = ol.split_reconstruction_error(u, sc)
    return ("pass" if ulps <= 1.0 else "fail"), ulps, f"{ulps} ulp" if ulps > 1 else ""


def check_rank_one_spectrum(rng):
    """Dense eigenvalues of -b phi^T Bhat^{-1} are {0 (n-1 times), phi^T w}."""
    sc = random_scenario(rng, n=int(rng.integers(2, 51)))
    u = random_density(rng, sc.grid)
    hat, boundary = ol.assemble_split(u, sc)
    mat = -np.outer(boundary.b, boundary.phi) @ np.linalg.inv(hat.dense())
    eigs = np.linalg.eigvals(mat)
    order = np.argsort(np.abs(eigs))
    small = np.abs(eigs[order[:-1]])
    top = eigs[order[-1]]
    expected = ol.rank_one_spectrum(hat, boundary).nonzero_rank_one_eig
    off = float(np.max(small)) if small.size else 0.0
    gap = abs(top - expected)
    ok = off < 1e-10 and gap <= 1e-10 * (1 + abs(expected))
    return ("pass" if ok else "fail"), max(off, gap), "" if ok else f"off={off:.3g}, gap={gap:.3g}"


def resolvent_residuals(u, lam, f, sc):
    """Finite-difference defects of ``g = (lam - B_u)^{-1} f``, relative to the terms' size.

    Returns ``(pde, boundary)``. ``pde`` is the L1 norm of
    ``g' + (lam + mu) g - f`` on the cell interfaces over
    ``||f||_1 + ||(lam + mu) g||_1``; ``boundary`` compares ``g(0+)``,
    linearly extrapolated, with ``int beta g``.
    """
    g = resolvent_apply(u, lam, f, sc)
    char = Characteristic.for_density(u, sc)
    h = u.grid.h
    gv, fv, mu = g.values, f.values, char.mortality
    rate_mid = lam + 0.5 * (mu[1:] + mu[:-1])
    defect = np.diff(gv) / h + rate_mid * 0.5 * (gv[1:] + gv[:-1]) - 0.5 * (fv[1:] + fv[:-1])
    scale = h * (np.sum(np.abs(fv)) + np.sum(np.abs((lam + mu) * gv)))
    pde = h * float(np.sum(np.abs(defect))) / scale
    g0 = 1.5 * gv[0] - 0.5 * gv[1]
    births = h * float(np.sum(char.fertility * gv))
    boundary = abs(g0 - births) / (float(np.max(np.abs(gv))) + h * float(np.sum(np.abs(char.fertility * gv))))
    return pde, boundary


def check_resolvent_identity(rng):
    """The resolvent solves its ODE and boundary condition to O(h)."""
    sc = random_scenario(rng, n=int(rng.integers(100, 400)))
    u = random_density(rng, sc.grid)
    char = Characteristic.for_density(u, sc)
    s, _, _ = char.dominant_root()
    for _ in range(20):
        lam = s + rng.uniform(-1.5, 3.0)
        if abs(char(lam) - 1.0) > 1e-3:
            break
    else:
        return "skip", 0.0, "no admissible lambda"
    coeffs = rng.normal(size=3)
    t = sc.grid.nodes / sc.grid.m
    f = Density(sc.grid, coeffs[0] + coeffs[1] * np.sin(np.pi * t) + coeffs[2] * np.cos(3 * t))
    pde, boundary = resolvent_residuals(u, lam, f, sc)
    h = sc.grid.h
    worst = max(pde, boundary) / h
    ok = pde <= 20 * h and boundary <= 20 * h
    return ("pass" if ok else "fail"), worst, "" if ok else f"pde={pde:.3g}, boundary={boundary:.3g}, h={h:.3g}"


SUITES = {
    "sign_equivalence": check_sign_equivalence,
    "ray_monotonicity": check_ray_monotonicity,
    "split_exactness": check_split_exactness,
    "rank_one_spectrum": check_rank_one_spectrum,
    "resolvent_identity": check_resolvent_identity,
}


def _run_one(args):
    name, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    try:
        return SUITES[name](rng)
    except SteadyPopError as exc:
        return "fail", 0.0, f"{type(exc).__name__}: {exc}"


def run_suites(seed: int, draws: int, names=None, workers=None) -> dict:
    """Run ``draws`` draws of each suite; results are independent of ``workers``."""
    names = list(names or SUITES)
    root = np.random.SeedSequence(seed)
    children = root.spawn(len(names))
    jobs = []
    for name, child in zip(names, children):
        jobs.extend((name, seq) for seq in child.spawn(draws))
    workers = workers or worker_count()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(job) for job in jobs]
    results = {name: SuiteResult(name) for name in names}
    for (name, _), (status, measure, detail) in zip(jobs, outcomes):
        res = results[name]
        if status == "pass":
            res.passed += 1
        elif status == "skip":
            res.skipped += 1
        else:
            res.failed += 1
            res.failures.append(detail)
        res.worst = max(res.worst, float(measure))
    return results
