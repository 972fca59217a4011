"""Smallness of a projection family near great circles.

For a direction xi, measure the weight of family members within rho of the
great circle orthogonal to xi, then search for the worst xi.
Run with ``python3 demos/smallness.py``.
"""
import numpy as np

from restproj import (
    generate_percolation_set, great_circle_family, map_family_to_sphere, smallness_profile,
    worst_case_smallness,
)

rhos = [2.0 ** -k for k in range(2, 7)]
G = map_family_to_sphere(generate_percolation_set(2, 4, 8, 4, seed=0), 1.5)

prof = smallness_profile(G, np.array([1.0, 0.0, 0.0]), rhos)
print("xi = e1:", np.round(prof.values, 4), f"slope {prof.slope:.3f}")

xi, worst = worst_case_smallness(G, rhos, xi_grid_size=200)
print(f"worst xi = {np.round(xi, 3)}  slope {worst.slope:.3f}")

# a family living on one great circle has no decay at all
C = great_circle_family(np.array([0.0, 0.0, 1.0]), 200)
_, flat = worst_case_smallness(C, rhos, xi_grid_size=200)
print(f"great circle family: worst slope {flat.slope:.3f}")
