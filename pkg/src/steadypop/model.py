"""Grids, densities, vital rates and the environmental feedback operators.

All integrals use the composite midpoint rule on a uniform grid of ``n``
cells covering ``[0, m]``; grid functions hold one value per cell midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Optional

import numpy as np

from . import ratedsl
from .errors import ScenarioError, ZeroPopulation

__all__ = [
    "POSITIVITY_FLOOR", "ModelKind", "Monotonicity", "AgeGrid", "Density",
    "RateFunction", "VitalRates", "integrate", "f2_total", "f1_hierarchy",
    "cumulative_hazard", "survival", "environment_profiles",
    "extinction_profiles",
]

# Totals at or below this are treated as the zero population.
POSITIVITY_FLOOR = 1e-300


class ModelKind(str, Enum):
    HIERARCHIC = "hierarchic"
    GURTIN_MCCAMY = "gurtin_mccamy"
    LINEAR = "linear"


class Monotonicity(str, Enum):
    DECREASING = "decreasing"
    INCREASING = "increasing"
    NONE = "none"


@dataclass(frozen=True)
class AgeGrid:
    """Uniform midpoint grid with ``n`` cells on ``[0, m]``."""

    m: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m > 0):
            raise ScenarioError(f"maximum age must be positive, got {self.m!r}")
        if int(self.n) != self.n or self.n < 2:
            raise ScenarioError(f"cell count must be an integer >= 2, got {self.n!r}")
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "n", int(self.n))

    @cached_property
    def h(self) -> float:
        return self.m / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = (np.arange(self.n) + 0.5) * self.h
        nodes.setflags(write=False)
        return nodes

    def refine(self, n: int) -> "AgeGrid":
        return AgeGrid(self.m, n)


class Density:
    """Grid function: one value per cell of ``grid``.

    Instances are immutable. Arithmetic with another Density requires an
    identical grid; scalars broadcast.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: AgeGrid, values):
        arr = np.array(values, dtype=float)
        if arr.shape == ():
            arr = np.full(grid.n, float(arr))
        if arr.shape != (grid.n,):
            raise ValueError(f"expected {grid.n} values, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Density is immutable")

    @classmethod
    def from_function(cls, grid: AgeGrid, func) -> "Density":
        """Sample ``func(ages)`` at the cell midpoints."""
        return cls(grid, np.broadcast_to(func(grid.nodes), (grid.n,)))

    @classmethod
    def uniform(cls, grid: AgeGrid) -> "Density":
        """Constant density with unit total mass."""
        return cls(grid, np.full(grid.n, 1.0 / grid.m))

    def _other(self, other):
        if isinstance(other, Density):
            if other.grid != self.grid:
                raise ValueError("densities live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Density(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Density(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Density(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Density(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Density(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Density(self.grid, -self.values)

    def __len__(self):
        return self.grid.n

    def __repr__(self):
        return f"Density(n={self.grid.n}, m={self.grid.m}, total={integrate(self):.6g})"

    def total(self) -> float:
        return integrate(self)

    def norm1(self) -> float:
        return self.grid.h * float(np.sum(np.abs(self.values)))

    def normalized(self) -> "Density":
        """Rescale to unit L1 norm."""
        norm = self.norm1()
        if norm <= POSITIVITY_FLOOR:
            raise ZeroPopulation("cannot normalise the zero density")
        return self / norm

    def interpolate(self, grid: AgeGrid) -> "Density":
        """Piecewise-linear resampling onto another grid over the same ages."""
        if grid.m != self.grid.m:
            raise ValueError("grids cover different age intervals")
        return Density(grid, np.interp(grid.nodes, self.grid.nodes, self.values))


# ---------------------------------------------------------------------------
# Rate functions

# family name -> (expression template, default parameters, required parameters)
FAMILIES = {
    "constant": ("{value}", {}, ("value",)),
    "hyperbolic": ("{value}/(1+{k}*x)", {"k": 1.0}, ("value",)),
    "saturating": ("{value}*{k}*x/(1+{k}*x)", {"k": 1.0}, ("value",)),
    "exponential": ("{value}*exp(-{k}*x)", {"k": 1.0}, ("value",)),
    "linear": ("{c0}+{c1}*a+{c2}*x", {"c0": 0.0, "c1": 0.0, "c2": 0.0}, ()),
}


class RateFunction:
    """Vital rate ``f(a, x)`` backed by a rate expression.

    Negative environment values are clamped to zero before evaluation, so
    the rate is extended as a constant to ``x < 0``.
    """

    def __init__(self, expr, family: Optional[str] = None, params: Optional[dict] = None):
        if isinstance(expr, str):
            expr = ratedsl.parse(expr)
        self.expr = expr
        self.family = family
        self.params = dict(params or {})
        self._vectorized = ratedsl.compile_vectorized(expr)

    @classmethod
    def from_expr(cls, text: str) -> "RateFunction":
        return cls(ratedsl.parse(text))

    @classmethod
    def constant(cls, value: float) -> "RateFunction":
        return cls.from_family("constant", {"value": value})

    @classmethod
    def from_family(cls, name: str, params: dict) -> "RateFunction":
        if name not in FAMILIES:
            raise ScenarioError(f"unknown rate family {name!r}; known: {sorted(FAMILIES)}")
        template, defaults, required = FAMILIES[name]
        missing = [key for key in required if key not in params]
        unknown = [key for key in params if key not in defaults and key not in required]
        if missing or unknown:
            raise ScenarioError(
                f"family {name!r}: missing parameters {missing}, unknown parameters {unknown}")
        merged = {**defaults, **{k: float(v) for k, v in params.items()}}
        text = template.format(**{k: repr(v) for k, v in merged.items()})
        return cls(ratedsl.parse(text), family=name, params=merged)

    @property
    def source(self) -> str:
        return ratedsl.to_source(self.expr)

    @cached_property
    def depends_on_environment(self) -> bool:
        return "x" in ratedsl.variables(self.expr)

    def __call__(self, a, x):
        a = np.asarray(a, dtype=float)
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return np.asarray(self._vectorized(a, x), dtype=float)

    def scalar(self, a: float, x: float) -> float:
        return ratedsl.evaluate(self.expr, float(a), max(float(x), 0.0))

    def to_json(self) -> dict:
        if self.family is not None:
            return {"family": self.family, "params": dict(self.params)}
        return {"expr": self.source}

    def __repr__(self):
        return f"RateFunction({self.source!r})"


def _probe_environment():
    return np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 25)])


@dataclass(frozen=True)
class VitalRates:
    """Fertility ``beta(a, x)`` and mortality ``mu(a, x)`` with metadata.

    ``mu0`` is the declared lower bound of the mortality, ``saturation_K`` a
    population size with ``max_a beta(a, K) < mu0`` when one is claimed.
    """

    beta: RateFunction
    mu: RateFunction
    mu0: float = 0.0
    beta_monotonicity: Monotonicity = Monotonicity.NONE
    model_kind: ModelKind = ModelKind.HIERARCHIC
    saturation_K: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "model_kind", ModelKind(self.model_kind))
        object.__setattr__(self, "beta_monotonicity", Monotonicity(self.beta_monotonicity))
        if self.mu0 < 0:
            raise ScenarioError("mu0 must be nonnegative")

    def probe_lattice(self, m: float):
        """Ages and environment values used for spot checks."""
        ages = np.linspace(0.0, m, 33)
        env = _probe_environment()
        if self.model_kind is ModelKind.HIERARCHIC:
            env_mu = np.linspace(0.0, 1.0, 21)
        else:
            env_mu = env
        return ages, env_mu, env

    def diagnostics(self, m: float) -> list:
        """Violations of the declared metadata on the probe lattice."""
        problems = []
        ages, env_mu, env_beta = self.probe_lattice(m)
        aa, xx = np.meshgrid(ages, env_mu, indexing="ij")
        mu = self.mu(aa, xx)
        if np.min(mu) < self.mu0:
            i, j = np.unravel_index(np.argmin(mu), mu.shape)
            problems.append(
                f"mu({ages[i]:.6g}, {env_mu[j]:.6g}) = {mu[i, j]:.6g} below declared mu0 = {self.mu0:.6g}")
        aa, xx = np.meshgrid(ages, env_beta, indexing="ij")
        beta = self.beta(aa, xx)
        if np.min(beta) < 0:
            problems.append("beta takes negative values")
        step = np.diff(beta, axis=1)
        if self.beta_monotonicity is Monotonicity.DECREASING and np.max(step) > 0:
            i, j = np.unravel_index(np.argmax(step), step.shape)
            problems.append(
                f"beta declared decreasing but beta({ages[i]:.6g}, .) rises between "
                f"x={env_beta[j]:.6g} and x={env_beta[j + 1]:.6g}")
        if self.beta_monotonicity is Monotonicity.INCREASING and np.min(step) < 0:
            i, j = np.unravel_index(np.argmin(step), step.shape)
            problems.append(
                f"beta declared increasing but beta({ages[i]:.6g}, .) falls between "
                f"x={env_beta[j]:.6g} and x={env_beta[j + 1]:.6g}")
        return problems


# ---------------------------------------------------------------------------
# Quadrature and feedback operators

def integrate(d: Density) -> float:
    """Midpoint rule ``h * sum(values)``."""
    return d.grid.h * float(np.sum(d.values))


def f2_total(u: Density) -> float:
    """Total population ``int_0^m u``."""
    return integrate(u)


def f1_hierarchy(u: Density) -> Density:
    """Fraction of the population older than each midpoint.

    The tail integral at ``a_i`` takes half of cell ``i`` plus all later
    cells, so the profile runs from about 1 at ``a = 0`` to about 0 at ``m``.
    Multiplying ``u`` by a positive constant leaves the result unchanged.
    """
    total = integrate(u)
    if not total > POSITIVITY_FLOOR:
        raise ZeroPopulation(f"relative tail undefined for total population {total!r}")
    vals = u.values
    # the denominator is the last reverse partial sum, so rounding keeps
    # 0 <= q <= 1 and q nonincreasing; the factor h cancels
    reverse = np.cumsum(vals[::-1])[::-1]
    later = np.zeros_like(vals)
    later[:-1] = reverse[1:]
    return Density(u.grid, (later + 0.5 * vals) / reverse[0])


def cumulative_hazard(rate_values: np.ndarray, h: float) -> np.ndarray:
    """``int_0^{a_i} rate`` by midpoint sums with a half cell at ``a_i``."""
    rate_values = np.asarray(rate_values, dtype=float)
    return h * (np.cumsum(rate_values) - 0.5 * rate_values)


def survival(q: Density, mu: RateFunction) -> Density:
    """Survival ``exp(-int_0^a mu(r, q(r)) dr)`` at the cell midpoints."""
    rates = mu(q.grid.nodes, q.values)
    return Density(q.grid, np.exp(-cumulative_hazard(rates, q.grid.h)))


def _environment(u: Density, rates: VitalRates):
    kind = rates.model_kind
    if kind is ModelKind.HIERARCHIC:
        return f1_hierarchy(u).values, f2_total(u)
    if kind is ModelKind.GURTIN_MCCAMY:
        total = f2_total(u)
        return np.full(u.grid.n, total), total
    return np.zeros(u.grid.n), 0.0


def environment_profiles(u: Density, rates: VitalRates):
    """Mortality and fertility felt at each age in the environment set by ``u``.

    Hierarchic: ``mu(a, F1(u)(a))`` and ``beta(a, F2(u))``. Gurtin-McCamy:
    both rates see the total population. Linear: both see ``x = 0``.
    """
    env_mu, env_beta = _environment(u, rates)
    grid = u.grid
    mortality = Density(grid, rates.mu(grid.nodes, env_mu))
    fertility = Density(grid, rates.beta(grid.nodes, np.full(grid.n, env_beta)))
    return mortality, fertility


def extinction_profiles(grid: AgeGrid, rates: VitalRates):
    """Rate profiles in the extinction environment (both arguments zero)."""
    zeros = np.zeros(grid.n)
    return Density(grid, rates.mu(grid.nodes, zeros)), Density(grid, rates.beta(grid.nodes, zeros))
