"""Projections of 3-D grid sets and measures onto lines, and the sampled
projection experiments (dimension part and measure part).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .analysis import ExponentProfile, box_dimension, make_profile
from .construct import GridSet, NaturalMeasure, ProjectionFamily
from .geometry import Direction3

DIMENSION_TOLERANCE = 0.12
MEASURE_SLOPE_TOLERANCE = 0.1
PASS_THRESHOLD = 0.9
MEASURE_DELTAS = tuple(2.0 ** -k for k in range(3, 9))


@dataclass(frozen=True, eq=False)
class Projected1D:
    """Image of a set (or measure) under ``pi_L``, in the coordinate along ``L``.

    ``masses`` is set for projected measures; ``bin_edges`` when binned.
    """

    direction: np.ndarray
    coordinates: np.ndarray
    resolution: float
    masses: Optional[np.ndarray] = None
    bin_edges: Optional[np.ndarray] = None

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum()) if self.masses is not None else math.nan


def _direction(L) -> np.ndarray:
    return L.vector if isinstance(L, Direction3) else Direction3(L).vector


def _project(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    # elementwise so the result does not depend on BLAS blocking
    out = points[:, 0] * x[0]
    for k in range(1, points.shape[1]):
        out = out + points[:, k] * x[k]
    return out


def project_set(E, L) -> Projected1D:
    """Project cell centres (or an ``(n, 3)`` point array) onto ``L``."""
    x = _direction(L)
    if isinstance(E, GridSet):
        if E.dim != 3:
            raise ValueError("project_set expects a 3-D grid set")
        points, resolution = E.centers, E.side
    else:
        points, resolution = np.asarray(E, dtype=float).reshape(-1, 3), 0.0
    if len(points) == 0:
        raise ValueError("cannot project an empty set")
    return Projected1D(x, _project(points, x), resolution)


def project_measure(mu: NaturalMeasure, L, delta: float) -> Projected1D:
    """Push ``mu`` forward to ``L`` and bin it into intervals ``[k delta, (k+1) delta)``."""
    E = mu.support
    if E.dim != 3:
        raise ValueError("project_measure expects a 3-D measure")
    if delta < E.side:
        raise ValueError(f"delta must be >= the cell size {E.side}")
    x = _direction(L)
    coords = _project(E.centers, x)
    k = np.floor(coords / delta).astype(np.int64)
    k0 = k.min()
    masses = np.bincount(k - k0, weights=mu.weights)
    edges = (np.arange(len(masses) + 1) + k0) * delta
    occupied = masses > 0
    centers = (edges[:-1] + delta / 2)[occupied]
    return Projected1D(x, centers, delta, masses[occupied], edges)


def projected_length_profile(p: Projected1D, delta_list: Sequence[float]) -> ExponentProfile:
    """Total length of the occupied ``delta``-intervals, for each ``delta``.

    A positive projection keeps this bounded below (fitted slope near 0);
    a null projection decays like ``delta``.
    """
    deltas = np.asarray(delta_list, dtype=float)
    if np.any(np.diff(deltas) >= 0):
        raise ValueError("delta_list must be decreasing")
    if np.any(deltas < p.resolution):
        raise ValueError(f"deltas must be >= the projection resolution {p.resolution}")
    origin = p.coordinates.min()
    values = [len(np.unique(np.floor((p.coordinates - origin) / d + 1e-9))) * d
              for d in deltas]
    return make_profile(deltas, values)


@dataclass(frozen=True)
class DirectionRecord:
    index: int
    direction: List[float]
    estimate: float
    passed: bool
    r2: float = math.nan


@dataclass(frozen=True)
class MmpReport:
    """One record per sampled direction plus summary statistics."""

    mode: str
    reference: float
    records: List[DirectionRecord]
    config: dict = field(default_factory=dict)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.records])

    @property
    def pass_fraction(self) -> float:
        if not self.records:
            return 0.0
        return sum(r.passed for r in self.records) / len(self.records)

    @property
    def passed(self) -> bool:
        return self.pass_fraction >= self.config.get("pass_threshold", PASS_THRESHOLD)

    def quantiles(self, qs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
        est = self.estimates
        return {f"q{int(round(q * 100)):02d}": float(np.quantile(est, q)) for q in qs}


def sample_directions(G: ProjectionFamily, num_dirs: int, seed) -> np.ndarray:
    """Indices of ``num_dirs`` family members drawn without replacement with
    probability proportional to weight."""
    if not 1 <= num_dirs <= len(G):
        raise ValueError(f"num_dirs must lie in [1, {len(G)}]")
    rng = np.random.default_rng(seed)
    return rng.choice(len(G), size=num_dirs, replace=False, p=G.weights / G.weights.sum())


def mmp_experiment(G: ProjectionFamily, E: GridSet, mode: str, num_dirs: int, seed,
                   reference: Optional[float] = None,
                   tolerance: Optional[float] = None,
                   scales: Optional[Sequence[float]] = None,
                   delta_list: Sequence[float] = MEASURE_DELTAS,
                   pass_threshold: float = PASS_THRESHOLD,
                   workers: int = 1) -> MmpReport:
    """Project ``E`` onto ``num_dirs`` weight-sampled lines of ``G``.

    ``dimension`` mode compares each projected box dimension with
    ``reference`` (default ``E.reference_dim``, which must be <= 1).
    ``measure`` mode needs ``reference > 1`` and passes a direction when the
    occupied-length profile shows no decay (|slope| <= tolerance).
    """
    if mode not in ("dimension", "measure"):
        raise ValueError(f"unknown mode {mode!r}")
    if reference is None:
        reference = E.reference_dim
    if reference is None:
        raise ValueError("the fixture carries no reference dimension")
    if mode == "dimension" and reference > 1:
        raise ValueError(f"dimension mode needs reference <= 1, got {reference}")
    if mode == "measure" and reference <= 1:
        raise ValueError(f"measure mode needs reference > 1, got {reference}")
    if E.dim != 3:
        raise ValueError("the projected set must be 3-dimensional")
    if tolerance is None:
        tolerance = DIMENSION_TOLERANCE if mode == "dimension" else MEASURE_SLOPE_TOLERANCE
    picks = sample_directions(G, num_dirs, seed)

    def run_one(i: int) -> DirectionRecord:
        x = G.directions[picks[i]]
        p = project_set(E, x)
        if mode == "dimension":
            est = box_dimension(p, scales)
            ok = abs(est.slope - reference) <= tolerance
            return DirectionRecord(i, x.tolist(), float(est.slope), bool(ok), float(est.r2))
        prof = projected_length_profile(p, delta_list)
        ok = prof.fitted and abs(prof.slope) <= tolerance
        return DirectionRecord(i, x.tolist(), float(prof.slope), bool(ok), float(prof.r2))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(run_one, range(num_dirs)))
    else:
        records = [run_one(i) for i in range(num_dirs)]
    config = dict(mode=mode, num_dirs=num_dirs, seed=seed, reference=reference,
                  tolerance=tolerance, pass_threshold=pass_threshold,
                  scales=None if scales is None else [float(s) for s in scales],
                  delta_list=[float(d) for d in delta_list])
    return MmpReport(mode, float(reference), records, config)
