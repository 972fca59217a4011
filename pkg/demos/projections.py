"""Dimension and measure of projections along a restricted family.

Run with ``python3 demos/projections.py``.
"""
from restproj import (
    generate_cantor_product, generate_percolation_set, map_family_to_sphere, mmp_experiment,
)

G = map_family_to_sphere(generate_percolation_set(2, 4, 8, 4, seed=0), 1.5)

# dimension of a Cantor product of dimension 3 log 2 / log 9 is kept by projection
E = generate_cantor_product(3, 9, [0, 8], 4)
rep = mmp_experiment(G, E, "dimension", 50, seed=0)
q = rep.quantiles()
print(f"dimension: reference {rep.reference:.4f}, pass fraction {rep.pass_fraction:.2f}, "
      f"median estimate {q['q50']:.3f}")

# a set of dimension 1.5 > 1 projects to positive length
F = generate_cantor_product(3, 4, [0, 3], 5)
rep = mmp_experiment(G, F, "measure", 50, seed=0,
                     delta_list=[2.0 ** -k for k in range(3, 8)])
q = rep.quantiles()
print(f"measure: pass fraction {rep.pass_fraction:.2f}, median length slope {q['q50']:.3f}")
