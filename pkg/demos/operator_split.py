"""The discrete generator B = Bhat + b phi^T and its rank-one spectrum.

Prints the small matrices for n = 5 and compares the power-iteration
eigenvalue with the continuum spectral bound as the grid is refined.
"""
import numpy as np

from steadypop import load_catalog, spectral_bound
from steadypop import operator_lab as ol

np.set_printoptions(precision=3, suppress=True, linewidth=100)
sc = load_catalog("gm_closed_form").with_n(5)
u = sc.initial_density()
hat, boundary = ol.assemble_split(u, sc)
print("Bhat =\n", hat.dense())
print("b   =", boundary.b)
print("phi =", boundary.phi)
rep = ol.rank_one_spectrum(hat, boundary)
print("eigenvalues of -b phi^T Bhat^-1:",
      np.sort(np.linalg.eigvals(-np.outer(boundary.b, boundary.phi) @ np.linalg.inv(hat.dense())).real))
print(f"phi^T w = {rep.nonzero_rank_one_eig:.6f}")
print(f"split error = {ol.split_reconstruction_error(u, sc)} ulp")

base = load_catalog("hierarchic_reference")
print("\n    n     s_h - s")
for n in (250, 500, 1000, 2000, 4000):
    sc = base.with_n(n)
    u = sc.initial_density()
    s_h = ol.dominant_eigenvalue(ol.combine(*ol.assemble_split(u, sc)))
    print(f"{n:5d}  {s_h - spectral_bound(u, sc).spectral_bound: .3e}")
