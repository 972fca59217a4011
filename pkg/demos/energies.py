"""Riesz energies in space and in frequency for the ternary Cantor measure.

The energy is finite for s below log 2 / log 3 and blows up above it.
Run with ``python3 demos/energies.py``.
"""
import math

from restproj import energy_fourier_side, generate_cantor_product, natural_measure, riesz_energy

dim = math.log(2) / math.log(3)
for s in (0.5, 0.8):
    row = []
    for depth in (4, 6, 8):
        mu = natural_measure(generate_cantor_product(1, 3, [0, 2], depth), dim)
        row.append(riesz_energy(mu, s))
    four = [energy_fourier_side(mu, s, K) for K in (3.0 ** 4, 3.0 ** 6)]
    print(f"s = {s}: Riesz depth 4/6/8 = " + " ".join(f"{v:.3f}" for v in row)
          + f";  Fourier cutoff 81/729 = {four[0]:.3f} {four[1]:.3f}")
