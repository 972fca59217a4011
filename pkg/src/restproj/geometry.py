"""Exact low-level geometry: grid cells, planar tubes, line projections and
the gnomonic-type map from a small planar patch onto the unit sphere.

The patch is the square ``[-1/10, 1/10]^2`` lifted to height ``z = 1/2``;
``sphere_map`` sends a patch point ``p`` to ``(p, 1/2) / |(p, 1/2)|``.

Tube convention: a :class:`Tube2` of width ``w`` is the closed
``w``-neighbourhood of a line, so its total thickness is ``2 w``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

PATCH_HALF_WIDTH = 0.1
PATCH_HEIGHT = 0.5

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Cell:
    """A depth-``depth`` cell of the base-``base`` grid on ``[0, 1]^dim``."""

    dim: int
    base: int
    depth: int
    index: Tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if len(self.index) != self.dim:
            raise ValueError("index length does not match dim")
        n = self.base ** self.depth
        if any(not 0 <= i < n for i in self.index):
            raise ValueError(f"index {self.index} outside [0, {n})")

    @property
    def side(self) -> float:
        return float(self.base) ** (-self.depth)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 0.5) * self.side

    def parent(self) -> "Cell":
        if self.depth == 0:
            raise ValueError("the root cell has no parent")
        return Cell(self.dim, self.base, self.depth - 1,
                    tuple(i // self.base for i in self.index))


@dataclass(frozen=True)
class Tube2:
    """Closed ``width``-neighbourhood of a line in the plane.

    The line is ``{p : -sin(angle) p_x + cos(angle) p_y = offset}``, i.e. it
    has direction ``(cos angle, sin angle)`` and signed distance ``offset``
    from the origin along the unit normal ``(-sin angle, cos angle)``.
    """

    angle: float
    offset: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"tube width must be positive, got {self.width}")
        if not 0 <= self.angle < np.pi:
            raise ValueError(f"angle must lie in [0, pi), got {self.angle}")

    @property
    def normal(self) -> np.ndarray:
        return np.array([-np.sin(self.angle), np.cos(self.angle)])

    def distance(self, points) -> np.ndarray:
        """Distance from each point (shape ``(..., 2)``) to the core line."""
        points = np.asarray(points, dtype=float)
        return np.abs(points @ self.normal - self.offset)

    @classmethod
    def through(cls, p, q, width: float) -> "Tube2":
        """Tube around the line through the two distinct points ``p``, ``q``."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        v = q - p
        if not np.any(v):
            raise ValueError("points must be distinct")
        angle = float(np.arctan2(v[1], v[0]) % np.pi)
        if angle >= np.pi:
            angle = 0.0
        normal = np.array([-np.sin(angle), np.cos(angle)])
        return cls(angle, float(p @ normal), width)


def as_unit(v, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``v`` renormalised, after checking it is a unit vector to ``tol``."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norm - 1.0) > tol):
        raise ValueError(f"expected unit vector(s), got norm {norm}")
    return v / np.expand_dims(norm, -1)


@dataclass(frozen=True, eq=False)
class Direction3:
    """A line through the origin in R^3, stored as a unit spanning vector."""

    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float).reshape(3)
        object.__setattr__(self, "vector", as_unit(v))
        self.vector.setflags(write=False)

    @classmethod
    def from_any(cls, v) -> "Direction3":
        """Normalise an arbitrary nonzero vector."""
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero vector does not span a line")
        return cls(v / n)

    def __eq__(self, other):
        if not isinstance(other, Direction3):
            return NotImplemented
        return bool(np.array_equal(self.vector, other.vector))

    def __hash__(self):
        return hash(self.vector.tobytes())


def _vector_of(L) -> np.ndarray:
    if isinstance(L, Direction3):
        return L.vector
    return as_unit(L)


def direction_dot(xi, L) -> float:
    """``|xi . x|`` for the unit vector ``x`` spanning ``L``.

    This is both the length of the orthogonal projection of ``xi`` onto the
    line ``L`` and the distance from ``xi`` to the plane ``L^perp``.
    """
    xi = as_unit(xi)
    return float(min(abs(xi @ _vector_of(L)), 1.0))


def sphere_map(p) -> np.ndarray:
    """Map patch coordinates ``p`` (shape ``(2,)`` or ``(n, 2)``) to S^2."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError("patch points must have two coordinates")
    if np.any(np.abs(p) > PATCH_HALF_WIDTH * (1 + 1e-12)):
        raise ValueError("point outside the patch [-1/10, 1/10]^2")
    q = np.concatenate([p, np.full(p.shape[:-1] + (1,), PATCH_HEIGHT)], axis=-1)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def bilipschitz_sample(num_pairs: int, seed=None) -> Tuple[float, float]:
    """Extremes of ``|F(x) - F(y)| / |x - y|`` over random patch point pairs.

    Pairs with ``x == y`` are skipped.
    """
    if num_pairs < 2:
        raise ValueError("num_pairs must be >= 2")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-PATCH_HALF_WIDTH, PATCH_HALF_WIDTH, (num_pairs, 2))
    y = rng.uniform(-PATCH_HALF_WIDTH, PATCH_HALF_WIDTH, (num_pairs, 2))
    return pair_ratio_extremes(x, y)


def pair_ratio_extremes(x, y) -> Tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = np.linalg.norm(x - y, axis=1)
    keep = dist > 0
    if not np.any(keep):
        raise ValueError("all pairs are degenerate")
    ratio = np.linalg.norm(sphere_map(x[keep]) - sphere_map(y[keep]), axis=1) / dist[keep]
    return float(ratio.min()), float(ratio.max())


def great_circle_preimage(normal) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Segment of the patch mapped by ``sphere_map`` onto the great circle
    ``normal^perp`` of S^2, as a pair of endpoints, or ``None`` if empty.

    The preimage is the line ``n1 x + n2 y = -n3 / 2`` clipped to the patch.
    """
    n1, n2, n3 = as_unit(normal)
    h = PATCH_HALF_WIDTH
    rhs = -n3 * PATCH_HEIGHT
    r = math.hypot(n1, n2)
    # the line lies at distance |rhs| / r from the origin
    if r * h * math.sqrt(2) < abs(rhs):
        return None
    # Parametrise the line as p0 + t u and clip against the square (Liang-Barsky).
    u = np.array([-n2, n1]) / r
    p0 = np.array([n1, n2]) / r * (rhs / r)
    t_lo, t_hi = -np.inf, np.inf
    for k in range(2):
        if abs(u[k]) < 1e-15:
            if abs(p0[k]) > h:
                return None
            continue
        a = (-h - p0[k]) / u[k]
        b = (h - p0[k]) / u[k]
        t_lo = max(t_lo, min(a, b))
        t_hi = min(t_hi, max(a, b))
    if t_lo > t_hi:
        return None
    a = np.clip(p0 + t_lo * u, -h, h)
    b = np.clip(p0 + t_hi * u, -h, h)
    return a, b


def tube_contains(p, tube: Tube2) -> bool:
    """True iff the distance from ``p`` to the tube's core line is <= width."""
    return bool(tube.distance(p) <= tube.width)


def fibonacci_sphere(n: int, hemisphere: bool = False) -> np.ndarray:
    """``n`` quasi-uniform unit vectors on S^2 (spiral / Fibonacci layout).

    With ``hemisphere=True`` the points cover the upper half ``z >= 0`` only.
    """
    if n < 1:
        raise ValueError("n must be positive")
    k = np.arange(n) + 0.5
    if hemisphere:
        z = 1.0 - k / n
    else:
        z = 1.0 - 2.0 * k / n
    phi = np.pi * (3.0 - np.sqrt(5.0)) * np.arange(n)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def spherical_cap(center, radius: float, n: int) -> np.ndarray:
    """``n`` quasi-uniform unit vectors in the geodesic cap of ``radius``
    around ``center`` (the centre itself is the first point)."""
    center = as_unit(center)
    k = np.arange(n)
    # Equal-area spiral over the cap: cos of the polar angle is uniform.
    cos_top = np.cos(radius)
    z = 1.0 - (1.0 - cos_top) * k / max(n - 1, 1)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    local = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    return local @ _frame(center)


def _frame(c: np.ndarray) -> np.ndarray:
    """Rows form an orthonormal basis whose last row is ``c``."""
    helper = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(c, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return np.vstack([e1, e2, c])
