"""Spectral quantities of the linearized generator in a frozen environment.

For a fixed environment ``u`` the dominant eigenvalue of the generator is the
real root ``lambda`` of the characteristic equation ``K(u, lambda) = 1`` with

    K(u, lambda) = int_0^m beta(a, E_beta(u)) exp(-lambda a) pi(a) da,

and the net reproduction number is ``R(u) = K(u, 0)``. ``K`` is strictly
decreasing in ``lambda`` whenever fertility is not identically zero, so the
sign of the spectral bound always agrees with the sign of ``R - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._roots import bisect
from .errors import BracketFailure, SingularResolvent, ZeroFertility
from .model import Density, cumulative_hazard, environment_profiles, extinction_profiles

__all__ = [
    "SpectralReport", "Characteristic", "characteristic_k", "spectral_bound",
    "spectral_bound_extinction", "net_reproduction",
    "net_reproduction_extinction", "resolvent_apply", "LAMBDA_LIMIT",
]

LAMBDA_LIMIT = 1e6
SIGN_TOL_R = 1e-6
SIGN_TOL_S = 1e-8


@dataclass(frozen=True)
class SpectralReport:
    spectral_bound: float
    net_reproduction: float
    sign_consistent: bool
    bracket: tuple
    iterations: int
    warnings: tuple = ()


class Characteristic:
    """``K(lambda)`` for fixed rate profiles on a grid.

    Each term is evaluated as ``beta_i * exp(-(lambda a_i + H_i))`` with the
    cumulative hazard ``H_i``, so large ``|lambda| m`` neither drifts nor
    produces ``0 * inf``.
    """

    def __init__(self, grid, mortality, fertility):
        self.grid = grid
        self.fertility = np.asarray(fertility, dtype=float)
        self.mortality = np.asarray(mortality, dtype=float)
        self.hazard = cumulative_hazard(self.mortality, grid.h)
        self._fertile = self.fertility > 0

    @classmethod
    def for_density(cls, u: Density, scenario) -> "Characteristic":
        mortality, fertility = environment_profiles(u, scenario.rates)
        return cls(u.grid, mortality.values, fertility.values)

    @classmethod
    def extinction(cls, scenario) -> "Characteristic":
        mortality, fertility = extinction_profiles(scenario.grid, scenario.rates)
        return cls(scenario.grid, mortality.values, fertility.values)

    def weights(self, lam: float) -> np.ndarray:
        """``exp(-(lambda a_i + H_i))``: survival discounted at rate ``lambda``."""
        with np.errstate(over="ignore"):
            return np.exp(-(lam * self.grid.nodes + self.hazard))

    def __call__(self, lam: float) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            terms = np.where(self._fertile, self.fertility * self.weights(lam), 0.0)
        return self.grid.h * float(np.sum(terms))

    def derivative(self, lam: float) -> float:
        """``dK/dlambda = -int a beta exp(-(lambda a + H))``."""
        with np.errstate(over="ignore", invalid="ignore"):
            terms = np.where(self._fertile, self.grid.nodes * self.fertility * self.weights(lam), 0.0)
        return -self.grid.h * float(np.sum(terms))

    def dominant_root(self):
        """Real root of ``K = 1`` by bracket doubling from ``[-1, 1]`` then bisection.

        Returns ``(root, (lo, hi), iterations)``.
        """
        if not np.any(self._fertile):
            raise ZeroFertility("fertility vanishes on the whole grid; K - 1 has no root")
        lo, hi = -1.0, 1.0
        g_lo, g_hi = self(lo) - 1.0, self(hi) - 1.0
        iterations = 0
        while g_hi > 0:
            lo, g_lo = hi, g_hi
            hi *= 2.0
            if hi > LAMBDA_LIMIT:
                raise BracketFailure(f"K(lambda) > 1 up to lambda = {LAMBDA_LIMIT:g}")
            g_hi = self(hi) - 1.0
            iterations += 1
        while g_lo < 0:
            hi, g_hi = lo, g_lo
            lo *= 2.0
            if lo < -LAMBDA_LIMIT:
                raise BracketFailure(f"K(lambda) < 1 down to lambda = {-LAMBDA_LIMIT:g}")
            g_lo = self(lo) - 1.0
            iterations += 1
        root, lo, hi, steps = bisect(
            lambda lam: self(lam) - 1.0, lo, hi, g_lo, g_hi,
            lambda x: 1e-12 * max(1.0, abs(x)), max_iter=200)
        return root, (lo, hi), iterations + steps


def _sign_consistent(s, r):
    if abs(r - 1.0) > SIGN_TOL_R and abs(s) > SIGN_TOL_S:
        return math.copysign(1.0, s) == math.copysign(1.0, r - 1.0)
    return True


def _report(char: Characteristic) -> SpectralReport:
    root, bracket, iterations = char.dominant_root()
    r = char(0.0)
    warnings = ()
    if not char.fertility[-1] > 0:
        warnings = ("fertility vanishes in the oldest age class; the generator may be reducible",)
    return SpectralReport(root, r, _sign_consistent(root, r), bracket, iterations, warnings)


def characteristic_k(u: Density, lam: float, scenario) -> float:
    """``K(u, lambda)``."""
    return Characteristic.for_density(u, scenario)(lam)


def spectral_bound(u: Density, scenario) -> SpectralReport:
    """Spectral bound of the generator in environment ``u``, with ``R(u)``."""
    return _report(Characteristic.for_density(u, scenario))


def spectral_bound_extinction(scenario) -> SpectralReport:
    """Spectral bound at the extinction environment (both rate arguments zero)."""
    return _report(Characteristic.extinction(scenario))


def net_reproduction(u: Density, scenario) -> float:
    """``R(u) = K(u, 0)``: lifetime offspring per newborn in environment ``u``."""
    return characteristic_k(u, 0.0, scenario)


def net_reproduction_extinction(scenario) -> float:
    """``R(0)``, defined without the hierarchy operator."""
    return Characteristic.extinction(scenario)(0.0)


def resolvent_apply(u: Density, lam: float, f: Density, scenario,
                    singular_tol: float = 1e-10) -> Density:
    """Apply ``(lambda - B_u)^{-1}`` to ``f``.

    With ``E(a) = exp(-(lambda a + H(a)))`` and
    ``J(a) = int_0^a f(x) E(a)/E(x) dx`` the result is

        g = J + E * int(beta J) / (1 - K(u, lambda)),

    i.e. ``g`` solves ``lambda g + g' + mu g = f`` with ``g(0) = int beta g``.
    ``J`` is accumulated cell by cell with the same half-cell convention as
    the survival function.
    """
    if f.grid != u.grid:
        raise ValueError("f and u live on different grids")
    char = Characteristic.for_density(u, scenario)
    denom = 1.0 - char(lam)
    if not abs(denom) > singular_tol:
        raise SingularResolvent(f"1 - K(u, {lam!r}) = {denom!r} is numerically zero")
    grid = u.grid
    h = grid.h
    # exponent increments between consecutive midpoints
    total_rate = lam * grid.nodes + char.hazard
    decay = np.exp(-np.diff(total_rate))
    fv = f.values
    carried = np.empty(grid.n)
    acc = 0.0
    carried[0] = 0.0
    for i in range(1, grid.n):
        acc = (acc + fv[i - 1]) * decay[i - 1]
        carried[i] = acc
    j = h * (carried + 0.5 * fv)
    boundary = h * float(np.sum(char.fertility * j)) / denom
    return Density(grid, j + boundary * char.weights(lam))
