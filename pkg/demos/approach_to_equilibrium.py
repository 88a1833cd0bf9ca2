"""Run the time stepper from half the steady state and from an extinction case."""
import numpy as np

from steadypop import load_catalog, simulate, solve_steady
from steadypop.spectral import spectral_bound_extinction

sc = load_catalog("gm_closed_form").with_n(1000)
p_star = solve_steady(sc).density
res = simulate(sc, 0.5 * p_star, horizon=60.0, stride=10_000)
print(f"gm_closed_form: P* = {p_star.total():.6f}")
for t in (0, 5, 10, 20, 40, 60):
    i = int(np.argmin(np.abs(res.times - t)))
    print(f"  t = {res.times[i]:5.1f}  P = {res.totals[i]:.6f}")
# the stepper has its own equilibrium, O(h) away from the solver's
print(f"  gap at t = 60: {abs(res.totals[-1] - p_star.total()):.1e} with h = {sc.grid.h:g}")

sc = load_catalog("extinction")
rep = spectral_bound_extinction(sc)
res = simulate(sc, sc.initial_density(), horizon=15.0, stride=10_000)
late = res.times >= 10
slope = np.polyfit(res.times[late], np.log(res.totals[late]), 1)[0]
print(f"\nextinction: R(0) = {rep.net_reproduction:.4f}, s(B_0) = {rep.spectral_bound:.4f}")
print(f"  fitted log-slope of P on [10, 15]: {slope:.4f}")
