"""Finite-resolution sets, natural measures and projection families.

A :class:`GridSet` is a union of depth-``n`` cells of the base-``M`` grid on
``[0, 1]^d``.  Two generators are provided:

* :func:`generate_percolation_set`: every surviving cell keeps exactly ``N``
  of its ``M^d`` children, chosen uniformly without replacement.  The set has
  dimension ``log N / log M``.
* :func:`generate_cantor_product`: keep cells whose base-``M`` digits all lie
  in a fixed pattern, in every coordinate.

Randomness for each parent cell comes from ``SeedSequence(seed,
spawn_key=(level, linear_index))`` so the output does not depend on how the
work is scheduled across workers.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import PATCH_HALF_WIDTH, fibonacci_sphere, sphere_map, as_unit


@dataclass(frozen=True, eq=False)
class GridSet:
    """Sorted, duplicate-free set of depth-``depth`` cells in ``[0, 1]^dim``.

    ``reference_dim`` is the analytic dimension of the limiting set when the
    generator knows it (never estimated from the cells themselves).
    """

    dim: int
    base: int
    depth: int
    indices: np.ndarray
    reference_dim: Optional[float] = None

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, self.dim)
        if idx.size and (idx.min() < 0 or idx.max() >= self.base ** self.depth):
            raise ValueError("cell index outside the grid")
        idx = np.unique(idx, axis=0)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __eq__(self, other):
        if not isinstance(other, GridSet):
            return NotImplemented
        return (self.dim, self.base, self.depth) == (other.dim, other.base, other.depth) \
            and np.array_equal(self.indices, other.indices)

    @property
    def side(self) -> float:
        return float(self.base) ** (-self.depth)

    @property
    def centers(self) -> np.ndarray:
        return (self.indices + 0.5) * self.side

    def truncate(self, depth: int) -> "GridSet":
        """The set of depth-``depth`` ancestors of the cells."""
        if not 0 <= depth <= self.depth:
            raise ValueError("truncation depth out of range")
        shift = self.base ** (self.depth - depth)
        return GridSet(self.dim, self.base, depth, self.indices // shift, self.reference_dim)

    def diameter(self) -> float:
        """Euclidean diameter of the union of the closed cells."""
        if len(self) == 0:
            return 0.0
        h = self.side
        lo = self.indices * h
        if self.dim == 1:
            return float(lo.max() + h - lo.min())
        corners = np.concatenate([lo + np.asarray(c) * h
                                  for c in itertools.product((0, 1), repeat=self.dim)])
        hull = corners[ConvexHull(corners).vertices]
        diff = hull[:, None, :] - hull[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())


def linear_index(indices: np.ndarray, base: int, depth: int) -> np.ndarray:
    """Row-major linear index of cells, last coordinate fastest."""
    side = base ** depth
    out = np.zeros(len(indices), dtype=np.int64)
    for k in range(indices.shape[1]):
        out = out * side + indices[:, k]
    return out


def _child_offsets(dim: int, base: int) -> np.ndarray:
    return np.array(list(itertools.product(range(base), repeat=dim)), dtype=np.int64)


def _choose_children(seed: int, level: int, parents_linear: np.ndarray,
                     n_children: int, keep: int) -> np.ndarray:
    out = np.empty((len(parents_linear), keep), dtype=np.int64)
    for i, lin in enumerate(parents_linear):
        ss = np.random.SeedSequence(seed, spawn_key=(level, int(lin)))
        rng = np.random.Generator(np.random.PCG64(ss))
        out[i] = np.sort(rng.choice(n_children, size=keep, replace=False))
    return out


def generate_percolation_set(d: int, M: int, N: int, depth: int, seed: int,
                             workers: int = 1) -> GridSet:
    """Random Cantor set where each surviving cell keeps exactly ``N`` children.

    Returns exactly ``N**depth`` cells at the given depth.  ``workers`` only
    changes how parents are distributed over threads, never the output.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if M < 2:
        raise ValueError("M must be >= 2")
    if not 1 <= N <= M ** d:
        raise ValueError(f"N must satisfy 1 <= N <= M^d = {M ** d}, got {N}")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    seed = int(seed)
    offsets = _child_offsets(d, M)
    cells = np.zeros((1, d), dtype=np.int64)
    for level in range(depth):
        lin = linear_index(cells, M, level)
        if N == M ** d:
            picks = np.broadcast_to(np.arange(N), (len(cells), N))
        elif workers == 1:
            picks = _choose_children(seed, level, lin, M ** d, N)
        else:
            chunks = np.array_split(lin, workers)
            with ThreadPoolExecutor(workers) as pool:
                parts = pool.map(lambda c: _choose_children(seed, level, c, M ** d, N), chunks)
                picks = np.concatenate(list(parts))
        cells = (cells[:, None, :] * M + offsets[picks]).reshape(-1, d)
    return GridSet(d, M, depth, cells, reference_dim=math.log(N) / math.log(M))


def generate_cantor_product(d: int, M: int, digit_pattern: Sequence[int], depth: int) -> GridSet:
    """Cells whose base-``M`` digits lie in ``digit_pattern`` in every coordinate."""
    pattern = sorted(set(int(x) for x in digit_pattern))
    if not pattern:
        raise ValueError("digit pattern must be nonempty")
    if pattern[0] < 0 or pattern[-1] >= M:
        raise ValueError(f"digits must lie in [0, {M})")
    line = np.zeros(1, dtype=np.int64)
    for _ in range(depth):
        line = (line[:, None] * M + np.asarray(pattern)).ravel()
    grids = np.meshgrid(*([line] * d), indexing="ij")
    indices = np.stack([g.ravel() for g in grids], axis=1)
    ref = d * math.log(len(pattern)) / math.log(M)
    return GridSet(d, M, depth, indices, reference_dim=ref)


def segment_set(d: int, M: int, depth: int, axis: int, at: float = 0.5) -> GridSet:
    """The cells covering the axis-parallel unit segment through ``(at, ..., at)``."""
    if not 0 <= axis < d:
        raise ValueError("axis out of range")
    n = M ** depth
    fixed = min(int(at * n), n - 1)
    indices = np.full((n, d), fixed, dtype=np.int64)
    indices[:, axis] = np.arange(n)
    return GridSet(d, M, depth, indices, reference_dim=1.0)


@dataclass(frozen=True)
class NaturalMeasure:
    """Equal mass ``M**(-alpha * depth)`` on every cell of ``support``."""

    support: GridSet
    alpha: float

    @property
    def weight(self) -> float:
        return float(self.support.base) ** (-self.alpha * self.support.depth)

    @property
    def total_mass(self) -> float:
        return len(self.support) * self.weight

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.support), self.weight)


def natural_measure(E: GridSet, alpha: float) -> NaturalMeasure:
    if not 0 < alpha <= E.dim:
        raise ValueError(f"alpha must lie in (0, {E.dim}], got {alpha}")
    return NaturalMeasure(E, float(alpha))


@dataclass(frozen=True)
class RegularityProfile:
    """Ratios ``mu(B(x, r)) / r**alpha`` over sampled centres and radii."""

    centers: np.ndarray
    radii: np.ndarray
    ratios: np.ndarray  # shape (num_centers, num_radii)

    @property
    def c_min(self) -> float:
        return float(self.ratios.min())

    @property
    def c_max(self) -> float:
        return float(self.ratios.max())

    @property
    def spread(self) -> float:
        return self.c_max / self.c_min if self.c_min > 0 else math.inf

    @property
    def drift(self) -> float:
        """Slope of log(median ratio) against log r.

        Bounded ratios give a drift near zero; an atom gives ``-alpha``.
        """
        med = np.median(self.ratios, axis=0)
        if len(self.radii) < 2:
            return 0.0
        return float(np.polyfit(np.log(self.radii), np.log(med), 1)[0])

    def is_regular(self, bound: float = 32.0, max_drift: float = 0.15) -> bool:
        return self.spread <= bound and abs(self.drift) <= max_drift

    def __iter__(self):
        yield self.c_min
        yield self.c_max


def ahlfors_regularity_profile(mu: NaturalMeasure, num_centers: int, radii,
                               seed=None) -> RegularityProfile:
    """Sample ``mu(B(x, r)) / r**alpha`` for support points ``x``.

    Radii must lie in ``(M**-depth, sqrt(d)]``.

    Balls are max-norm balls centred at cell centres; each cell's mass is
    spread uniformly over the cell, so partially covered cells contribute
    the covered fraction.
    """
    E = mu.support
    if len(E) == 0:
        raise ValueError("empty support")
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    # radii are bounded by the ambient cube so degenerate sets can be probed
    # above their own diameter
    top = math.sqrt(E.dim)
    if np.any(radii <= E.side) or np.any(radii > top):
        raise ValueError(f"radii must lie in ({E.side}, {top}]")
    rng = np.random.default_rng(seed)
    n = min(num_centers, len(E))
    chosen = np.sort(rng.choice(len(E), size=n, replace=False))
    h = E.side
    centers = E.centers
    ratios = np.empty((n, len(radii)))
    rmax = radii[0]
    for i, c in enumerate(centers[chosen]):
        near = np.all(np.abs(centers - c) < rmax + h, axis=1)
        pts = centers[near]
        for j, r in enumerate(radii):
            lo = np.maximum(pts - h / 2, c - r)
            hi = np.minimum(pts + h / 2, c + r)
            frac = np.prod(np.clip(hi - lo, 0.0, None) / h, axis=1)
            ratios[i, j] = frac.sum() * mu.weight / r ** mu.alpha
    return RegularityProfile(centers[chosen], radii, ratios)


@dataclass(frozen=True, eq=False)
class ProjectionFamily:
    """Weighted finite set of lines through the origin in R^3."""

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        dirs = as_unit(np.asarray(self.directions, dtype=float).reshape(-1, 3))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(dirs):
            raise ValueError("one weight per direction required")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        dirs.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())


def patch_coordinates(E: GridSet) -> np.ndarray:
    """Cell centres of a planar set moved from ``[0,1]^2`` into the patch."""
    if E.dim != 2:
        raise ValueError("only planar sets can be mapped to the sphere")
    return E.centers / 5.0 - PATCH_HALF_WIDTH


def map_family_to_sphere(E: GridSet, alpha: float) -> ProjectionFamily:
    """Radially project the lifted planar set onto S^2, one line per cell."""
    mu = natural_measure(E, alpha)
    return ProjectionFamily(sphere_map(patch_coordinates(E)), mu.weights)


def uniform_family(n: int) -> ProjectionFamily:
    """``n`` quasi-uniform directions with equal weights summing to 1."""
    return ProjectionFamily(fibonacci_sphere(n), np.full(n, 1.0 / n))


def great_circle_family(normal, n: int) -> ProjectionFamily:
    """``n`` equally spaced lines in the plane ``normal^perp``, total weight 1."""
    normal = as_unit(normal)
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(normal, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    t = np.pi * np.arange(n) / n
    dirs = np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2
    return ProjectionFamily(dirs, np.full(n, 1.0 / n))
