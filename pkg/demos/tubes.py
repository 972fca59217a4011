"""Tube exponent of a percolation measure.

The largest mass of a planar tube of half-width w should decay like w**s
for some s close to 1. Run with ``python3 demos/tubes.py``.
"""
from restproj import generate_percolation_set, natural_measure, tube_exponent_profile

E = generate_percolation_set(2, 4, 8, 5, seed=0)
mu = natural_measure(E, 1.5)

widths = [4.0 ** -k for k in range(1, 4)]
prof = tube_exponent_profile(mu, widths, num_random_tubes=500, seed=0)

for w, v, t in zip(prof.scales, prof.values, prof.params["witnesses"]):
    print(f"w = {w:<10.5g} sup mass = {v:.4f}  witness (angle, offset) = "
          f"({t[0]:.3f}, {t[1]:.3f})")
print(f"slope = {prof.slope:.3f}, R^2 = {prof.r2:.4f}")
