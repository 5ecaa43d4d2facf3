"""Finite-scale thickness of points and the thick-point spectrum of ball boundaries.

Thickness is an eps -> 0 limit; here it is the OLS slope over a fixed
window of radii, and the window is always reported with the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fractal
from .formulas import GammaParams, alpha_window
from .gff import FieldGrid, circle_averages
from .metric import (
    DistanceField,
    MetricBall,
    WeightGrid,
    as_cells,
    euclidean_ball_cells,
    internal_diameter,
)

MIN_BIN_CELLS = 20
MIN_BOUNDARY_CELLS = 100
DEFAULT_BINS = 24


@dataclass(frozen=True)
class AlphaEstimate:
    """Thickness of one cell.  ``alpha_metric`` is nan when only the
    circle-average slope was computed, and vice versa."""

    point: tuple[int, int]
    alpha_circle: float
    alpha_metric: float
    n_scales: int


def _slopes_vs_log_inv_r(values: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Row-wise OLS slope of ``values`` against ``log(1/r)``."""
    x = np.log(1.0 / radii)
    xc = x - x.mean()
    return (values - values.mean(axis=1, keepdims=True)) @ xc / (xc @ xc)


def _check_radii(radii) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size < 3:
        raise ValueError("need at least 3 radii")
    if np.unique(radii).size != radii.size or np.any(radii <= 0):
        raise ValueError("radii must be distinct and positive")
    return radii


def circle_alpha(f: FieldGrid, points, radii) -> np.ndarray:
    """Array form of :func:`classify_alpha`: slope of ``h_r(z)`` against ``log(1/r)``."""
    radii = _check_radii(radii)
    cells = as_cells(points, f.shape)
    return _slopes_vs_log_inv_r(circle_averages(f, f.cell_xy(cells), radii), radii)


def classify_alpha(f: FieldGrid, points, radii) -> list[AlphaEstimate]:
    cells = as_cells(points, f.shape)
    alphas = circle_alpha(f, cells, radii)
    k = len(radii)
    return [AlphaEstimate((int(r), int(c)), float(a), math.nan, k) for (r, c), a in zip(cells, alphas)]


# --------------------------------------------------------------------------
# metric thickness


@dataclass(frozen=True)
class Recentering:
    """Affine map from raw log-diameters to the continuum convention.

    The lattice metric carries no ``eps^(xi Q)`` prefactor, so raw slopes of
    ``log diam`` against ``log eps`` are offset from the continuum ones.
    ``slope_shift`` and ``log_offset`` are chosen so that typical points read
    ``log diam = xi Q log eps``.
    """

    slope_shift: float = 0.0
    log_offset: float = 0.0

    def apply(self, length, eps):
        """Map a raw length measured at scale ``eps`` to the continuum convention."""
        return np.asarray(length) * np.power(eps, self.slope_shift) * math.exp(-self.log_offset)


def log_diameters(w: WeightGrid, points, radii) -> np.ndarray:
    """``log`` internal diameter of the Euclidean ball ``B_r(z)`` for each point and radius."""
    f = w.source_field
    radii = _check_radii(radii)
    if np.any(radii < 4.0 * f.spacing - 1e-12):
        raise ValueError("radii must be at least 4 grid spacings")
    cells = as_cells(points, w.shape)
    xy = f.cell_xy(cells)
    if np.any(np.abs(xy).max(axis=1)[:, None] + radii[None, :] > 1.0 - 0.5 * f.spacing + 1e-12):
        raise ValueError("Euclidean ball leaves the grid")
    out = np.empty((cells.shape[0], radii.size))
    c = f.coords()
    for i, (x, y) in enumerate(xy):
        for j, r in enumerate(radii):
            # restrict to a bounding box before building the mask
            c0 = int(np.searchsorted(c, x - r - f.spacing))
            c1 = int(np.searchsorted(c, x + r + f.spacing))
            r0 = int(np.searchsorted(c, y - r - f.spacing))
            r1 = int(np.searchsorted(c, y + r + f.spacing))
            cols = c[c0:c1]
            rows = c[r0:r1]
            local = np.hypot(cols[None, :] - x, rows[:, None] - y) <= r
            region = np.argwhere(local) + [r0, c0]
            out[i, j] = math.log(internal_diameter(w, region).value)
    return out


def metric_slopes(w: WeightGrid, points, radii) -> tuple[np.ndarray, np.ndarray]:
    """OLS slope and intercept of ``log diam(B_r(z))`` against ``log r`` per point."""
    radii = _check_radii(radii)
    ld = log_diameters(w, points, radii)
    x = np.log(radii)
    xc = x - x.mean()
    slopes = (ld - ld.mean(axis=1, keepdims=True)) @ xc / (xc @ xc)
    intercepts = ld.mean(axis=1) - slopes * x.mean()
    return slopes, intercepts


def estimate_recentering(w: WeightGrid, p: GammaParams, radii, *, n_points: int = 64,
                         seed: int = 0, window: float = 0.5) -> Recentering:
    """Recentering from the median slope and intercept at uniformly random cells.

    Points are drawn from the concentric window ``[-window, window]^2``.
    """
    f = w.source_field
    rng = np.random.default_rng(seed)
    c = f.coords()
    inside = np.nonzero(np.abs(c) <= window)[0]
    pts = np.column_stack([rng.choice(inside, n_points), rng.choice(inside, n_points)])
    slopes, intercepts = metric_slopes(w, pts, radii)
    shift = p.xi * p.q - float(np.median(slopes))
    return Recentering(shift, float(np.median(intercepts)))


def classify_metric_alpha(w: WeightGrid, p: GammaParams, points, radii,
                          recentering: Recentering | None = None) -> list[AlphaEstimate]:
    """Metric thickness ``alpha = Q - slope / xi`` from internal diameters of ``B_r(z)``.

    Without ``recentering`` the raw lattice slope is used, so a flat field
    reads ``Q - 1/xi``.
    """
    rc = recentering or Recentering()
    cells = as_cells(points, w.shape)
    slopes, _ = metric_slopes(w, cells, radii)
    alphas = p.q - (slopes + rc.slope_shift) / p.xi
    k = len(radii)
    return [AlphaEstimate((int(r), int(c)), math.nan, float(a), k) for (r, c), a in zip(cells, alphas)]


# --------------------------------------------------------------------------
# boundary spectrum


@dataclass(frozen=True)
class SpectrumResult:
    alpha_bins: np.ndarray
    bin_dims: list = field(repr=False)  # DimensionEstimate or None per bin
    counts: np.ndarray = field(repr=False)
    bin_width: float = 0.0
    radii: np.ndarray = field(default=None, repr=False)

    def dims(self) -> np.ndarray:
        return np.array([d.slope if d is not None else np.nan for d in self.bin_dims])

    def stderrs(self) -> np.ndarray:
        return np.array([d.slope_stderr if d is not None else np.nan for d in self.bin_dims])

    def peak_alpha(self) -> float:
        d = self.dims()
        if np.all(np.isnan(d)):
            return math.nan
        return float(self.alpha_bins[int(np.nanargmax(d))])


def bin_edges(p: GammaParams, observed_lo: float, observed_hi: float, bins: int = DEFAULT_BINS):
    """Bins of width ``window / bins`` aligned to the alpha window's lower end,
    extended by whole bins to cover the observed range."""
    win = alpha_window(p)
    width = win.width / bins
    k_lo = math.floor((min(observed_lo, win.lo) - win.lo) / width)
    k_hi = math.ceil((max(observed_hi, win.hi) - win.lo) / width)
    if k_hi == k_lo:
        k_hi += 1
    return win.lo + width * np.arange(k_lo, k_hi + 1), width


def default_spectrum_radii(f: FieldGrid, r_max: float = 0.125, count: int = 8) -> np.ndarray:
    return np.geomspace(8.0 * f.spacing, r_max, count)


def boundary_spectrum(f: FieldGrid, w: WeightGrid, p: GammaParams, ball: MetricBall,
                      bins: int = DEFAULT_BINS, *, radii=None, cells=None,
                      extent=(-0.5, -0.5, 0.5, 0.5), scales=None) -> SpectrumResult:
    """Box-counting dimension of the boundary cells in each alpha bin.

    ``cells`` optionally restricts the boundary (e.g. to a measurement
    window); ``scales`` are the box sizes used for every bin.
    """
    if ball.touches_frame:
        raise ValueError("ball touches the grid frame; spectrum would be truncated")
    cells = ball.boundary if cells is None else as_cells(cells, f.shape)
    if cells.shape[0] < MIN_BOUNDARY_CELLS:
        raise ValueError(f"need at least {MIN_BOUNDARY_CELLS} boundary cells, got {cells.shape[0]}")
    radii = default_spectrum_radii(f) if radii is None else np.asarray(radii, dtype=float)
    if scales is None:
        scales = fractal.dyadic_scales(extent, 8.0 * f.spacing, (extent[2] - extent[0]) / 8.0)
    alphas = circle_alpha(f, cells, radii)
    edges, width = bin_edges(p, float(alphas.min()), float(alphas.max()), bins)
    idx = np.clip(np.searchsorted(edges, alphas, side="right") - 1, 0, edges.size - 2)
    counts = np.bincount(idx, minlength=edges.size - 1)
    centres = 0.5 * (edges[:-1] + edges[1:])
    pts = f.cell_xy(cells)
    dims = []
    for b in range(centres.size):
        sel = idx == b
        if counts[b] < MIN_BIN_CELLS:
            dims.append(None)
            continue
        try:
            dims.append(fractal.box_dimension(pts[sel], extent, scales))
        except ValueError:
            dims.append(None)
    return SpectrumResult(centres, dims, counts, width, radii)


# --------------------------------------------------------------------------
# one-point event


def one_point_event(f: FieldGrid, d: DistanceField, w: WeightGrid, p: GammaParams, z, eps: float,
                    alpha: float, zeta: float, s: float,
                    recentering: Recentering | None = None) -> bool:
    """Whether ``z`` is within an ``eps``-scale bracket of the sphere of radius ``s``
    and its ``eps``-ball has diameter of order ``eps^(xi (Q - alpha))``.

    Both the distance gap ``|D(0, z) - s|`` and the internal diameter of
    ``B_eps(z)`` are lattice lengths at scale ``eps``; ``recentering`` maps
    them to the continuum convention before comparing with the brackets.
    """
    rc = recentering or Recentering()
    z = tuple(int(v) for v in np.asarray(z).reshape(2))
    xy = f.cell_xy([z])[0]
    if np.abs(xy).max() + eps > 1.0 - 0.5 * f.spacing or eps < 2.0 * f.spacing:
        raise ValueError("B_eps(z) must lie inside the grid and span several cells")
    if zeta < 0:
        raise ValueError("zeta must be nonnegative")
    expo = p.xi * (p.q - alpha)
    dz = float(d.dist[z])
    if not math.isfinite(dz):
        return False
    gap = float(rc.apply(abs(dz - s), eps))
    if gap > eps ** (expo - zeta):
        return False
    region = euclidean_ball_cells(f, xy, eps)
    diam = float(rc.apply(internal_diameter(w, region).value, eps))
    return eps ** (expo + zeta) <= diam <= eps ** (expo - zeta)
