"""Solve for the positive steady state of the two nonlinear catalog scenarios.

gm_closed_form has p*(a) = p0 exp(-a) with P* = 2 (1 - e^-5) - 1; the
hierarchic scenario has no closed form, so its solution is checked by the
renewal identity p = B pi instead.
"""
import math

import numpy as np

from steadypop import load_catalog, solve_steady
from steadypop.steady import renewal_gap

e5 = math.exp(-5.0)
sc = load_catalog("gm_closed_form")
res = solve_steady(sc)
exact = (2 * (1 - e5) - 1) / (1 - e5) * np.exp(-sc.grid.nodes)
print("gm_closed_form")
print(f"  P* = {res.total:.8f} (exact {2 * (1 - e5) - 1:.8f}), {res.iterations} iterations")
print(f"  L1 error of the profile: {sc.grid.h * np.abs(res.density.values - exact).sum():.2e}")

sc = load_catalog("hierarchic_reference")
res = solve_steady(sc)
print("hierarchic_reference")
print(f"  P* = {res.total:.8f} after {res.iterations} iterations")
print(f"  step norms: {', '.join(f'{x:.1e}' for x in res.l1_step_norms[:6])} ...")
print(f"  |R(p*) - 1| = {abs(res.net_reproduction_at_solution - 1):.1e}")
print(f"  renewal gap = {renewal_gap(res.density, sc):.1e}")
for n in (500, 1000, 2000):
    print(f"  n = {n:5d}: P* = {solve_steady(sc.with_n(n)).total:.8f}")
