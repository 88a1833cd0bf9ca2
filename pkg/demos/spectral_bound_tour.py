"""Spectral bound and net reproduction on the constant-rate scenario.

With beta = 2, mu = 1 and m = 5 both quantities have closed forms, so the
numbers below can be checked by hand. Then the same environment is scaled
along a ray for the hierarchic scenario, where s and R both fall as the
population grows.
"""
import math

import numpy as np

from steadypop import Density, load_catalog, net_reproduction, spectral_bound

sc = load_catalog("constant_rate")
u = Density.uniform(sc.grid)
rep = spectral_bound(u, sc)
print(f"n = {sc.grid.n}, h = {sc.grid.h:g}")
print(f"R(u) = {rep.net_reproduction:.8f}   closed form {2 * (1 - math.exp(-5)):.8f}")
print(f"s(u) = {rep.spectral_bound:.8f}   bracket width {rep.bracket[1] - rep.bracket[0]:.1e}")
print(f"sign(s) == sign(R - 1): {rep.sign_consistent}")

sc = load_catalog("hierarchic_reference")
u = sc.initial_density()
print("\nhierarchic scenario along the ray alpha * u")
print(" alpha        s          R")
for alpha in np.geomspace(0.25, 8, 6):
    r = spectral_bound(alpha * u, sc)
    print(f"{alpha:6.2f} {r.spectral_bound:10.6f} {net_reproduction(alpha * u, sc):10.6f}")
