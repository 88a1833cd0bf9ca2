"""Finite-dimensional generator with the birth law as a rank-one boundary term.

The upwind discretization with implicit mortality gives a lower bidiagonal
matrix ``Bhat`` (zero inflow at age 0) with diagonal ``-1/h - mu_i`` and
subdiagonal ``1/h``. Births enter through the first cell, which adds the
rank-one term ``b phi^T`` with ``b = e_0 / h`` and ``phi_i = h beta_i``:

    B = Bhat + b phi^T.

``w = -Bhat^{-1} b`` is the discrete survival function, the only nonzero
eigenvalue of ``-b phi^T Bhat^{-1}`` is ``phi^T w`` (the discrete net
reproduction number), and the dominant eigenvalue of ``B`` changes sign
exactly where ``phi^T w`` crosses one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import ConvergenceFailure, MonotonicityViolation
from .model import Density, ModelKind, environment_profiles

__all__ = [
    "DiscreteGenerator", "RankOneBoundary", "EigenReport", "assemble",
    "assemble_split", "assemble_full", "discrete_survival",
    "rank_one_spectrum", "power_iteration", "dominant_eigenvalue",
    "ray_monotonicity_scan", "resolvent_gap", "split_reconstruction_error",
    "dump_matrices",
]


@dataclass(frozen=True, eq=False)
class DiscreteGenerator:
    """Lower bidiagonal matrix plus an optional dense first row.

    ``kind`` is ``"homogeneous"`` for ``Bhat`` (no inflow row) or ``"full"``
    for ``B``, whose first row additionally carries the fertility.
    """

    kind: str
    diagonal: np.ndarray
    subdiagonal: np.ndarray
    inflow: np.ndarray
    h: float

    @property
    def n(self) -> int:
        return self.diagonal.shape[0]

    def dense(self) -> np.ndarray:
        mat = np.diag(self.diagonal) + np.diag(self.subdiagonal, -1)
        mat[0, :] += self.inflow
        return mat

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diagonal * x
        y[1:] += self.subdiagonal * x[:-1]
        y[0] += self.inflow @ x
        return y

    @property
    def mortality(self) -> np.ndarray:
        return -self.diagonal - 1.0 / self.h


@dataclass(frozen=True, eq=False)
class RankOneBoundary:
    """``b = e_0 / h`` and ``phi = h * beta`` (the discrete birth functional)."""

    b: np.ndarray
    phi: np.ndarray
    fertility: np.ndarray
    h: float


@dataclass(frozen=True)
class EigenReport:
    dominant: float
    nonzero_rank_one_eig: float
    discrete_R: float
    residual_norm: float


def assemble(h: float, mortality, fertility):
    """``(Bhat, boundary)`` from raw rate profiles (any ``n >= 1``)."""
    mortality = np.asarray(mortality, dtype=float)
    fertility = np.asarray(fertility, dtype=float)
    n = mortality.shape[0]
    inv_h = 1.0 / h
    hat = DiscreteGenerator(
        "homogeneous", -inv_h - mortality, np.full(n - 1, inv_h), np.zeros(n), h)
    b = np.zeros(n)
    b[0] = inv_h
    return hat, RankOneBoundary(b, h * fertility, fertility.copy(), h)


def assemble_full(h: float, mortality, fertility) -> DiscreteGenerator:
    """``B`` assembled directly from the ghost-cell boundary flux.

    The ghost cell holds ``Phi_h(p) = h sum_j beta_j p_j``; the flux into cell
    0 is ``Phi_h(p) / h``, so the inflow row is ``(1/h) * (h beta)``.
    """
    mortality = np.asarray(mortality, dtype=float)
    n = mortality.shape[0]
    inv_h = 1.0 / h
    inflow = inv_h * (h * np.asarray(fertility, dtype=float))
    return DiscreteGenerator("full", -inv_h - mortality, np.full(n - 1, inv_h), inflow, h)


def _profiles(u: Density, scenario):
    mortality, fertility = environment_profiles(u, scenario.rates)
    return mortality.values, fertility.values


def assemble_split(u: Density, scenario):
    """``(Bhat, boundary)`` with the rates felt in environment ``u``."""
    mortality, fertility = _profiles(u, scenario)
    return assemble(u.grid.h, mortality, fertility)


def combine(hat: DiscreteGenerator, boundary: RankOneBoundary) -> DiscreteGenerator:
    """``Bhat + b phi^T`` as a structured generator."""
    inflow = boundary.b[0] * boundary.phi
    return DiscreteGenerator("full", hat.diagonal, hat.subdiagonal, inflow, hat.h)


def split_reconstruction_error(u: Density, scenario) -> float:
    """Largest entrywise gap between ``B`` and ``Bhat + b phi^T``, in ulps."""
    mortality, fertility = _profiles(u, scenario)
    full = assemble_full(u.grid.h, mortality, fertility).dense()
    hat, boundary = assemble(u.grid.h, mortality, fertility)
    hat_dense = hat.dense()
    outer = np.outer(boundary.b, boundary.phi)
    rebuilt = hat_dense + outer
    # ulps of the largest term entering each entry; near-cancellation on the
    # diagonal would otherwise inflate a sub-ulp rounding of the inflow
    largest = np.maximum.reduce([np.abs(full), np.abs(hat_dense), np.abs(outer)])
    scale = np.spacing(largest)
    gap = np.abs(full - rebuilt)
    return float(np.max(np.where(gap == 0, 0.0, gap / scale)))


def discrete_survival(hat, b) -> np.ndarray:
    """``w = -Bhat^{-1} b`` by forward substitution.

    For ``b = e_0 / h`` this is ``w_i = prod_{j<=i} 1 / (1 + h mu_j)``.
    """
    if isinstance(hat, DiscreteGenerator):
        diag, sub = hat.diagonal, hat.subdiagonal
        b = np.asarray(b, dtype=float)
        if np.any(b[1:] != 0):
            w = linalg.solve_triangular(hat.dense(), -b, lower=True)
        else:
            w0 = -b[0] / diag[0]
            w = w0 * np.concatenate([[1.0], np.cumprod(-sub / diag[1:])])
    else:
        w = linalg.solve_triangular(np.asarray(hat, dtype=float), -np.asarray(b, dtype=float), lower=True)
    if np.any(w <= 0) or np.any(w > 1) or np.any(np.diff(w) > 0):
        raise ArithmeticError("discrete survival left (0, 1] or increased with age")
    return w


def rank_one_spectrum(hat: DiscreteGenerator, boundary: RankOneBoundary,
                      with_dominant: bool = False) -> EigenReport:
    """Nonzero eigenvalue ``phi^T w`` of ``-b phi^T Bhat^{-1}`` and ``h sum beta w``."""
    w = discrete_survival(hat, boundary.b)
    eig = float(boundary.phi @ w)
    discrete_r = boundary.h * float(boundary.fertility @ w)
    dominant = residual = math.nan
    if with_dominant:
        dominant, _, _, residual = power_iteration(combine(hat, boundary))
    return EigenReport(dominant, eig, discrete_r, residual)


def _as_generator(mat) -> DiscreteGenerator:
    if isinstance(mat, DiscreteGenerator):
        return mat
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if np.any(np.triu(mat, 1)[1:]) or np.any(np.tril(mat, -2)):
        raise ValueError("expected lower bidiagonal structure below the first row")
    inflow = mat[0].copy()
    inflow[0] = 0.0
    h = 1.0 / mat[1, 0] if n > 1 and mat[1, 0] > 0 else 1.0
    return DiscreteGenerator("full", np.diag(mat).copy(), np.diag(mat, -1).copy(), inflow, h)


def power_iteration(gen, rtol: float = 1e-12, max_iter: int = 100_000,
                    start: Optional[np.ndarray] = None):
    """Perron value of ``B + sigma I`` minus ``sigma``.

    ``sigma = -min(diag Bhat) = 1/h + max mu`` makes the shifted matrix
    entrywise nonnegative. Iteration stops once the Collatz-Wielandt bounds
    ``min (Mx)_i / x_i <= rho <= max (Mx)_i / x_i`` agree to ``rtol``
    relative. Returns ``(eigenvalue, vector, iterations, residual)`` where the
    vector has unit sum and ``residual = ||Bx - lambda x||_1``.
    """
    gen = _as_generator(gen)
    if np.any(gen.subdiagonal < 0) or np.any(gen.inflow < 0):
        raise ValueError("off-diagonal entries must be nonnegative")
    n = gen.n
    sigma = max(0.0, -float(np.min(gen.diagonal)))
    shifted_diag = gen.diagonal + sigma

    def apply(x):
        y = shifted_diag * x
        y[1:] += gen.subdiagonal * x[:-1]
        y[0] += gen.inflow @ x
        return y

    x = np.full(n, 1.0 / n) if start is None else np.asarray(start, float) / np.sum(start)
    rho = math.nan
    for iteration in range(1, max_iter + 1):
        y = apply(x)
        total = float(np.sum(y))
        if total <= 0:
            # nilpotent shifted matrix: every eigenvalue of B equals -sigma
            return -sigma, x, iteration, float(np.sum(np.abs(gen.matvec(x) + sigma * x)))
        mask = x > 1e-290
        ratios = y[mask] / x[mask]
        lo, hi = float(np.min(ratios)), float(np.max(ratios))
        rho = total
        x = y / total
        if hi - lo <= rtol * abs(rho):
            break
    else:
        raise ConvergenceFailure(
            f"power iteration did not converge in {max_iter} steps", estimate=rho - sigma)
    value = 0.5 * (lo + hi) - sigma
    residual = float(np.sum(np.abs(gen.matvec(x) - value * x)))
    return value, x, iteration, residual


def _perron_start(gen) -> Optional[np.ndarray]:
    """Eigenvector guess from the scalar equation of a full generator.

    Below row 0 an eigenvector obeys ``x_i = sub_{i-1} x_{i-1} / (lam - diag_i)``,
    so with ``x_0 = 1`` the eigenvalue solves ``inflow . x(lam) = lam - diag_0``.
    Bisection on that equation costs O(n) per step; the power iteration that
    follows only has to certify the result. Returns None when no root is
    bracketed.
    """
    if gen.n < 2 or not np.any(gen.inflow > 0) or np.any(gen.subdiagonal <= 0):
        return None
    diag, log_sub = gen.diagonal, np.log(gen.subdiagonal)
    floor = float(np.max(diag))

    def log_x(lam):
        return np.concatenate(([0.0], np.cumsum(log_sub - np.log(lam - diag[1:]))))

    def excess(lam):
        lx = log_x(lam)
        top = float(np.max(lx))
        flow = float(gen.inflow @ np.exp(lx - top))
        return math.log(flow) + top - math.log(lam - diag[0]) if flow > 0 else -math.inf

    lo = floor + 1e-12 * max(1.0, abs(floor))
    if not excess(lo) > 0:
        return None
    hi = lo + 1.0
    while excess(hi) > 0:
        hi = lo + 2.0 * (hi - lo)
        if hi - lo > 1e12:
            return None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    lx = log_x(hi)
    # floor the entries so the Collatz-Wielandt bounds see the whole vector
    return np.maximum(np.exp(lx - np.max(lx)), 1e-200)


def dominant_eigenvalue(gen) -> float:
    """Dominant (spectral bound) eigenvalue of a discrete generator."""
    gen = _as_generator(gen)
    start = _perron_start(gen)
    try:
        return power_iteration(gen, start=start)[0]
    except ConvergenceFailure:
        if start is None:
            raise
        return power_iteration(gen)[0]


def ray_monotonicity_scan(u: Density, alphas, scenario, check: bool = True) -> np.ndarray:
    """Dominant eigenvalue of ``B(alpha u)`` for each ``alpha``.

    With ``check`` set, raises :class:`MonotonicityViolation` unless the
    values decrease strictly, and for the hierarchic kind also unless
    ``Bhat`` is entrywise identical along the ray.
    """
    alphas = [float(a) for a in alphas]
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    values = []
    reference_hat = None
    for alpha in alphas:
        hat, boundary = assemble_split(alpha * u, scenario)
        if check and scenario.rates.model_kind is ModelKind.HIERARCHIC:
            if reference_hat is None:
                reference_hat = hat
            elif not np.array_equal(hat.diagonal, reference_hat.diagonal):
                raise MonotonicityViolation(
                    f"Bhat changed along the ray between alpha={alphas[0]} and alpha={alpha}",
                    pair=(alphas[0], alpha))
        values.append(dominant_eigenvalue(combine(hat, boundary)))
    values = np.array(values)
    if check:
        for k in range(len(values) - 1):
            if not values[k + 1] < values[k]:
                raise MonotonicityViolation(
                    f"s({alphas[k + 1]}) = {values[k + 1]!r} is not below s({alphas[k]}) = {values[k]!r}",
                    pair=(alphas[k], alphas[k + 1]))
    return values


def resolvent_gap(u: Density, alpha1: float, alpha2: float, lam: float, scenario) -> float:
    """Smallest entry of ``(lam - B(alpha1 u))^{-1} - (lam - B(alpha2 u))^{-1}``.

    Dense, intended for small grids.
    """
    eye = np.eye(u.grid.n)
    resolvents = []
    for alpha in (alpha1, alpha2):
        hat, boundary = assemble_split(alpha * u, scenario)
        resolvents.append(np.linalg.inv(lam * eye - combine(hat, boundary).dense()))
    return float(np.min(resolvents[0] - resolvents[1]))


def dump_matrices(u: Density, scenario, directory) -> list:
    """Write ``Bhat``, ``B``, ``b`` and ``phi`` as row-major text files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    hat, boundary = assemble_split(u, scenario)
    full = combine(hat, boundary)
    written = []
    for name, arr in (("Bhat.txt", hat.dense()), ("B.txt", full.dense()),
                      ("b.txt", boundary.b[None, :]), ("phi.txt", boundary.phi[None, :])):
        path = directory / name
        np.savetxt(path, arr, fmt="%.17g")
        written.append(str(path))
    return written
