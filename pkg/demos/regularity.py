"""Ahlfors regularity of a percolation measure.

Run with ``python3 demos/regularity.py``.
"""
import numpy as np

from restproj import ahlfors_regularity_profile, generate_percolation_set, natural_measure

# Split each square into 4 x 4 and keep 8 of the 16 at every level,
# so the natural measure has exponent alpha = log 8 / log 4 = 1.5.
E = generate_percolation_set(2, 4, 8, 5, seed=0)
alpha = np.log(8) / np.log(4)
print(f"{len(E)} cells at depth {E.depth}, alpha = {alpha:.3f}")

mu = natural_measure(E, alpha)
prof = ahlfors_regularity_profile(mu, 100, [4.0 ** -k for k in range(1, 5)], seed=0)

# mu(B(x, r)) / r**alpha should stay between two constants
print(f"c_min = {prof.c_min:.3f}  C_max = {prof.c_max:.3f}  spread = {prof.spread:.2f}")
