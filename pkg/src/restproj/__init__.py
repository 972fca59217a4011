"""Finite-resolution experiments on restricted families of projections in R^3.

Modules
-------
geometry
    Unit directions, planar tubes, the patch-to-sphere map and great circles.
construct
    Grid sets, natural measures, percolation and Cantor constructions,
    projection families and the Ahlfors regularity profile.
analysis
    Log-log fits, box dimension, tube and smallness profiles, energies.
projection
    Orthogonal projections of sets and measures, and the sampled experiments.
io, plots, cli
    File formats, SVG figures and the ``restproj`` command line.
"""
from .analysis import (
    ExponentProfile, InsufficientScales, box_dimension, energy_fourier_side, loglog_fit,
    riesz_energy, smallness_profile, tube_exponent_profile, worst_case_smallness,
)
from .construct import (
    GridSet, NaturalMeasure, ProjectionFamily, ahlfors_regularity_profile,
    generate_cantor_product, generate_percolation_set, great_circle_family,
    map_family_to_sphere, natural_measure, segment_set, uniform_family,
)
from .geometry import Direction3, Tube2
from .projection import MmpReport, mmp_experiment, project_measure, project_set

__version__ = "0.1.0"

__all__ = [
    "Direction3", "ExponentProfile", "GridSet", "InsufficientScales", "MmpReport",
    "NaturalMeasure", "ProjectionFamily", "Tube2", "ahlfors_regularity_profile",
    "box_dimension", "energy_fourier_side", "generate_cantor_product",
    "generate_percolation_set", "great_circle_family", "loglog_fit", "map_family_to_sphere",
    "mmp_experiment", "natural_measure", "project_measure", "project_set", "riesz_energy",
    "segment_set", "smallness_profile", "tube_exponent_profile", "uniform_family",
    "worst_case_smallness",
]
