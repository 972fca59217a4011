"""Estimators: box-counting dimension, Riesz energies (direct and Fourier
side), tube-mass exponents for planar measures and smallness exponents for
projection families.

Every exponent is an ordinary least-squares slope on log-log pairs.  Scales
with a zero value are dropped and fewer than three usable scales is refused
(:class:`InsufficientScales`).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .construct import GridSet, NaturalMeasure, ProjectionFamily
from .geometry import as_unit, fibonacci_sphere, spherical_cap

MIN_FIT_SCALES = 3


class InsufficientScales(ValueError):
    """Raised when a log-log fit has fewer than three usable scales."""


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    halfwidth: float  # 95% confidence half-width of the slope


def loglog_fit(x, y, min_points: int = MIN_FIT_SCALES) -> LogLogFit:
    """Least-squares line through ``(log x, log y)`` over pairs with ``y > 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < min_points:
        raise InsufficientScales(
            f"need {min_points} scales with positive values, got {int(keep.sum())}")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    n = len(lx)
    xm = lx - lx.mean()
    sxx = float(xm @ xm)
    if sxx == 0:
        raise InsufficientScales("all scales coincide")
    slope = float(xm @ (ly - ly.mean())) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    ss_res = float(resid @ resid)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    if n > 2:
        se = math.sqrt(ss_res / (n - 2) / sxx)
        halfwidth = float(stats.t.ppf(0.975, n - 2) * se)
    else:
        halfwidth = math.inf
    return LogLogFit(slope, intercept, r2, halfwidth)


@dataclass(frozen=True)
class DimensionEstimate:
    """Box counts ``N(delta)`` and the slope of log N against log(1/delta)."""

    scales: np.ndarray
    counts: np.ndarray
    slope: float
    r2: float
    halfwidth: float

    @property
    def dimension(self) -> float:
        return self.slope


@dataclass(frozen=True)
class ExponentProfile:
    """``(scale, value)`` pairs with value ~ scale**slope.

    ``slope`` is NaN when fewer than three scales carry a positive value.
    """

    scales: np.ndarray
    values: np.ndarray
    slope: float = math.nan
    r2: float = math.nan
    intercept: float = math.nan
    params: dict = field(default_factory=dict)

    @property
    def fitted(self) -> bool:
        return not math.isnan(self.slope)


def make_profile(scales, values, **params) -> ExponentProfile:
    scales = np.asarray(scales, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(-scales, kind="stable")
    scales, values = scales[order], values[order]
    if np.any(scales <= 0) or np.any(np.diff(scales) >= 0):
        raise ValueError("scales must be positive and distinct")
    if np.any(values < 0):
        raise ValueError("profile values must be nonnegative")
    try:
        fit = loglog_fit(scales, values)
    except InsufficientScales:
        return ExponentProfile(scales, values, params=params)
    return ExponentProfile(scales, values, fit.slope, fit.r2, fit.intercept, params)


# --- box counting -----------------------------------------------------------

def _default_scales(resolution: float, base: int) -> np.ndarray:
    # base**-k down to the resolution, minus the coarsest and the finest two
    k_max = int(math.floor(math.log(1.0 / resolution) / math.log(base) + 1e-9))
    scales = float(base) ** -np.arange(0, k_max + 1)
    return scales[1:-2]


def box_counts(points: np.ndarray, scales, origin=None) -> np.ndarray:
    """Number of occupied boxes ``prod [o + k delta, o + (k+1) delta)``."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if origin is None:
        origin = points.min(axis=0)
    rel = points - origin
    counts = []
    for delta in scales:
        boxes = np.floor(rel / delta + 1e-9).astype(np.int64)
        # pack the box coordinates into one integer key per point
        span = boxes.max(axis=0) + 1
        key = np.zeros(len(boxes), dtype=np.int64)
        for k in range(boxes.shape[1]):
            key = key * span[k] + boxes[:, k]
        counts.append(len(np.unique(key)))
    return np.asarray(counts)


def box_dimension(obj, scales: Optional[Sequence[float]] = None) -> DimensionEstimate:
    """Box-counting dimension of a :class:`GridSet`, a projected set or a
    point array.

    Without ``scales``, grid sets use ``M**-k`` and projected sets ``2**-k``
    down to their resolution, dropping the coarsest and the two finest
    scales.  Grid sets are counted on boxes aligned with ``[0, 1]^d``.
    """
    from .projection import Projected1D

    if isinstance(obj, GridSet):
        points, origin = obj.centers, np.zeros(obj.dim)
        default = lambda: _default_scales(obj.side, obj.base)
    elif isinstance(obj, Projected1D):
        points, origin = obj.coordinates, None
        default = lambda: _default_scales(obj.resolution, 2)
    else:
        points, origin = np.asarray(obj, dtype=float), None
        default = None
    if len(points) == 0:
        raise ValueError("cannot estimate the dimension of an empty set")
    if scales is None:
        if default is None:
            raise ValueError("scales are required for raw point arrays")
        scales = default()
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    if len(scales) < 2:
        raise ValueError("at least two scales are required")
    counts = box_counts(points, scales, origin)
    fit = loglog_fit(1.0 / scales, counts, min_points=2)
    return DimensionEstimate(scales, counts, fit.slope, fit.r2, fit.halfwidth)


# --- energies ---------------------------------------------------------------

def _as_discrete(mu) -> Tuple[np.ndarray, np.ndarray, float]:
    """Positions, masses and the default distance floor of a measure."""
    if isinstance(mu, NaturalMeasure):
        E = mu.support
        return E.centers, mu.weights, E.side * math.sqrt(E.dim)
    pos, mass = mu
    pos = np.asarray(pos, dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    return pos, np.asarray(mass, dtype=float), 0.0


def riesz_energy(mu, s: float, floor: Optional[float] = None,
                 exclude_self: bool = False, block: int = 2048) -> float:
    """Discrete Riesz ``s``-energy ``sum_ij m_i m_j max(|x_i - x_j|, floor)**-s``.

    ``mu`` is a :class:`NaturalMeasure` (floor defaults to the cell diameter)
    or a ``(positions, masses)`` pair (floor defaults to 0).  Returns ``inf``
    when a zero distance is not floored, i.e. the energy diverges.
    """
    if not s > 0:
        raise ValueError("s must be positive")
    pos, mass, default_floor = _as_discrete(mu)
    floor = default_floor if floor is None else float(floor)
    total = 0.0
    n = len(pos)
    for a in range(0, n, block):
        diff = pos[a:a + block, None, :] - pos[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        if exclude_self:
            rows = np.arange(a, min(a + block, n))
            dist[rows - a, rows] = np.inf
        dist = np.maximum(dist, floor)
        with np.errstate(divide="ignore"):
            kern = dist ** -s
        if np.isinf(kern).any():
            return math.inf
        total += float(mass[a:a + block] @ kern @ mass)
    return total


def fourier_transform(pos: np.ndarray, mass: np.ndarray, freqs: np.ndarray,
                      block: int = 4096) -> np.ndarray:
    """``mu_hat(x) = sum_j m_j exp(-2 pi i <x, y_j>)`` at each frequency."""
    out = np.empty(len(freqs), dtype=complex)
    for a in range(0, len(freqs), block):
        phase = -2j * np.pi * (freqs[a:a + block] @ pos.T)
        out[a:a + block] = np.exp(phase) @ mass
    return out


def _sphere_directions(d: int, n: Optional[int]) -> Tuple[np.ndarray, float]:
    """Half-sphere directions (|mu_hat| is even) and the full sphere area."""
    if d == 1:
        return np.ones((1, 1)), 2.0
    if d == 2:
        n = n or 64
        t = np.pi * (np.arange(n) + 0.5) / n
        return np.column_stack([np.cos(t), np.sin(t)]), 2 * np.pi
    n = n or 256
    return fibonacci_sphere(n, hemisphere=True), 4 * np.pi


def energy_fourier_side(mu, s: float, frequency_cutoff: float,
                        num_radial_samples: int = 4096,
                        num_directions: Optional[int] = None) -> float:
    """Quadrature of ``int_{|x| <= K} |x|**(s-d) |mu_hat(x)|**2 dx``.

    In polar form the radial integrand is ``r**(s-1)`` times the spherical
    mean of ``|mu_hat|**2``.  On ``[0, 1]`` the substitution ``u = r**s``
    removes the singularity; ``[1, K]`` uses composite 8-point
    Gauss-Legendre panels, ``num_radial_samples`` nodes in total.
    """
    pos, mass, _ = _as_discrete(mu)
    d = pos.shape[1]
    if not 0 < s < d:
        raise ValueError(f"s must lie in (0, {d})")
    K = float(frequency_cutoff)
    if K < 1:
        raise ValueError("frequency cutoff must be >= 1")
    dirs, area = _sphere_directions(d, num_directions)

    def spherical_mean(r: np.ndarray) -> np.ndarray:
        freqs = (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        ft = fourier_transform(pos, mass, freqs)
        return (np.abs(ft) ** 2).reshape(len(r), len(dirs)).mean(axis=1)

    gx, gw = np.polynomial.legendre.leggauss(8)
    # [0, 1]: int r^(s-1) g(r) dr = (1/s) int_0^1 g(u^(1/s)) du
    u = (gx + 1) / 2
    head = float((gw / 2) @ spherical_mean(u ** (1.0 / s))) / s
    tail = 0.0
    if K > 1:
        panels = max(1, int(math.ceil(num_radial_samples / 8)))
        panels = max(panels, int(math.ceil(K - 1)))
        edges = np.linspace(1.0, K, panels + 1)
        half = np.diff(edges) / 2
        mid = (edges[:-1] + edges[1:]) / 2
        r = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        w = (half[:, None] * gw[None, :]).ravel()
        tail = float((w * r ** (s - 1)) @ spherical_mean(r))
    return area * (head + tail)


# --- tube condition ---------------------------------------------------------

def _tube_sup(points: np.ndarray, weight: float, total: float, w: float,
              density: float, random_tubes: np.ndarray) -> Tuple[float, Tuple[float, float]]:
    """Largest tube mass found for width ``w`` and a tube ``(angle, offset)``
    attaining it, over the grid and the given random tubes."""
    x, y = points[:, 0], points[:, 1]
    best, witness = -1.0, (0.0, 0.0)
    n_angles = int(math.ceil(math.pi / w * density))
    step = w / density
    span = max(1, int(round(2 * w / step)))
    for k in range(n_angles):
        t = math.pi * k / n_angles
        proj = -math.sin(t) * x + math.cos(t) * y
        lo, hi = proj.min(), proj.max()
        if hi - lo <= 2 * w:
            return total, (t, float((lo + hi) / 2))
        # offsets lo + j*step; the tube centred at lo + (j + span/2)*step
        # covers bins j .. j+span-1
        bins = np.bincount(((proj - lo) / step).astype(np.int64))
        if len(bins) <= span:
            return total, (t, float((lo + hi) / 2))
        csum = np.concatenate([[0], np.cumsum(bins)])
        window = csum[span:] - csum[:-span]
        j = int(window.argmax())
        if window[j] * weight > best:
            best, witness = float(window[j]) * weight, (t, float(lo + (j + span / 2) * step))
    for t, c in random_tubes:
        proj = -math.sin(t) * x + math.cos(t) * y
        mass = float(np.count_nonzero(np.abs(proj - c) <= w)) * weight
        if mass > best:
            best, witness = mass, (float(t), float(c))
    return best, witness


def tube_exponent_profile(mu: NaturalMeasure, widths: Sequence[float],
                          grid_density: float = 1.0, num_random_tubes: int = 0,
                          seed=None, workers: int = 1) -> ExponentProfile:
    """Estimate ``sup_T mu(T)`` over tubes of each width ``w`` and fit the
    exponent ``t`` in ``sup_T mu(T) ~ w**t``.

    Candidates per width are a grid of ``ceil(pi / w)`` angles times offsets
    spaced ``w`` (both refined by ``grid_density``) plus ``num_random_tubes``
    random tubes through mass-sampled support points.  Values are made
    nondecreasing in ``w``, since widening a tube never loses mass.
    """
    E = mu.support
    if E.dim != 2:
        raise ValueError("tube profiles need a planar measure")
    widths = np.asarray(sorted(widths, reverse=True), dtype=float)
    if np.any(widths <= E.side) or np.any(widths >= 1):
        raise ValueError(f"widths must lie in ({E.side}, 1)")
    if grid_density <= 0:
        raise ValueError("grid density must be positive")
    pts = E.centers
    rng = np.random.default_rng(seed)
    draws = []
    for _ in widths:
        t = rng.uniform(0, math.pi, num_random_tubes)
        anchor = pts[rng.integers(0, len(pts), num_random_tubes)]
        c = -np.sin(t) * anchor[:, 0] + np.cos(t) * anchor[:, 1]
        draws.append(np.column_stack([t, c]))

    def job(i):
        return _tube_sup(pts, mu.weight, mu.total_mass, widths[i], grid_density, draws[i])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            found = list(pool.map(job, range(len(widths))))
    else:
        found = [job(i) for i in range(len(widths))]
    values = np.array([v for v, _ in found])
    values = np.maximum.accumulate(values[::-1])[::-1]
    return make_profile(widths, values, grid_density=grid_density,
                        num_random_tubes=num_random_tubes, seed=seed,
                        witnesses=[list(t) for _, t in found])


# --- projection smallness ---------------------------------------------------

def _band_masses(G: ProjectionFamily, xis: np.ndarray, rhos: np.ndarray) -> np.ndarray:
    D = G.directions
    out = np.empty((len(xis), len(rhos)))
    for i, xi in enumerate(xis):
        dots = np.abs(D[:, 0] * xi[0] + D[:, 1] * xi[1] + D[:, 2] * xi[2])
        order = np.argsort(dots, kind="stable")
        csum = np.concatenate([[0.0], np.cumsum(G.weights[order])])
        out[i] = csum[np.searchsorted(dots[order], rhos, side="right")]
    return out


def smallness_profile(G: ProjectionFamily, xi, rho_list: Sequence[float]) -> ExponentProfile:
    """Weight of ``{L in G : |pi_L(xi)| <= rho}`` for each ``rho``."""
    xi = as_unit(xi)
    rhos = np.asarray(rho_list, dtype=float)
    if np.any(rhos <= 0) or np.any(np.diff(rhos) >= 0):
        raise ValueError("rho_list must be positive and decreasing")
    values = _band_masses(G, xi[None, :], rhos)[0]
    return make_profile(rhos, values, xi=xi.tolist())


def _slopes(G, xis, rhos, workers):
    chunks = np.array_split(np.arange(len(xis)), max(1, min(workers, len(xis))))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _band_masses(G, xis[c], rhos), chunks))
    else:
        parts = [_band_masses(G, xis[c], rhos) for c in chunks]
    masses = np.concatenate(parts)
    slopes = np.empty(len(xis))
    for i, row in enumerate(masses):
        try:
            slopes[i] = loglog_fit(rhos, row).slope
        except InsufficientScales:
            slopes[i] = math.inf  # no mass near xi^perp: the bound holds vacuously
    return slopes


def _argmin_lex(slopes: np.ndarray, xis: np.ndarray) -> int:
    keys = (xis[:, 2], xis[:, 1], xis[:, 0], slopes)
    return int(np.lexsort(keys)[0])


def worst_case_smallness(G: ProjectionFamily, rho_list: Sequence[float],
                         xi_grid_size: int = 500, refine_steps: int = 2,
                         cap_points: int = 64, workers: int = 1
                         ) -> Tuple[np.ndarray, ExponentProfile]:
    """Probe direction with the smallest fitted smallness exponent.

    Searches a quasi-uniform upper-hemisphere grid (``xi`` and ``-xi`` give
    the same profile), then refines ``refine_steps`` times in geodesic caps
    around the current minimiser, shrinking the cap radius by 4 each round.
    Probes without three positive scales count as slope ``+inf``.
    """
    if xi_grid_size < 100:
        raise ValueError("xi_grid_size must be >= 100")
    rhos = np.asarray(rho_list, dtype=float)
    if np.any(rhos <= 0) or np.any(np.diff(rhos) >= 0):
        raise ValueError("rho_list must be positive and decreasing")
    xis = fibonacci_sphere(xi_grid_size, hemisphere=True)
    slopes = _slopes(G, xis, rhos, workers)
    i = _argmin_lex(slopes, xis)
    best_xi, best_slope = xis[i], slopes[i]
    radius = math.sqrt(2 * math.pi / xi_grid_size)
    for _ in range(refine_steps):
        cand = spherical_cap(best_xi, radius, cap_points)
        cand = cand * np.where(cand[:, 2:] < 0, -1.0, 1.0)
        s = _slopes(G, cand, rhos, workers)
        j = _argmin_lex(s, cand)
        if s[j] < best_slope:
            best_xi, best_slope = cand[j], s[j]
        radius /= 4
    return best_xi, smallness_profile(G, best_xi, rhos)
