"""Box-counting and metric-cover dimension estimates.

Box counting stands in for Hausdorff dimension throughout; estimates are
labelled as box-counting estimates of ``dim_H``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from .metric import WeightGrid, as_cells, internal_diameter, shortest_distances

LABEL = "box-counting estimate of dim_H"


@dataclass(frozen=True)
class DimensionEstimate:
    scales: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    # slopes after dropping the largest / smallest scale (nan with < 4 pairs)
    slope_drop_coarse: float = float("nan")
    slope_drop_fine: float = float("nan")

    @property
    def log_scales(self) -> np.ndarray:
        return np.log(self.scales)

    @property
    def log_counts(self) -> np.ndarray:
        return np.log(self.counts)

    def summary(self) -> dict:
        return {
            "label": LABEL,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "window": [float(self.scales.min()), float(self.scales.max())],
            "slope_drop_coarse": self.slope_drop_coarse,
            "slope_drop_fine": self.slope_drop_fine,
        }


def _ols(x, y):
    if np.ptp(x) == 0:
        raise ValueError("zero variance in log scales")
    res = stats.linregress(x, y)
    resid = y - (res.intercept + res.slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return float(res.slope), float(res.intercept), r2, float(res.stderr)


def fit_dimension(pairs) -> DimensionEstimate:
    """OLS of ``log count`` against ``log(1/scale)``.

    ``pairs`` is a sequence of ``(scale, count)``; counts may be fractional
    (offset-averaged box counts).
    """
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if arr.shape[0] < 3:
        raise ValueError("need at least 3 (scale, count) pairs")
    if np.any(arr[:, 1] <= 0) or np.any(arr[:, 0] <= 0):
        raise ValueError("scales and counts must be positive")
    arr = arr[np.argsort(-arr[:, 0])]
    scales, counts = arr[:, 0], arr[:, 1]
    if np.any(np.diff(scales) >= 0):
        raise ValueError("scales must be distinct")
    x = np.log(1.0 / scales)
    y = np.log(counts)
    slope, intercept, r2, se = _ols(x, y)
    drop_c = drop_f = float("nan")
    if arr.shape[0] >= 4:
        drop_c = _ols(x[1:], y[1:])[0]
        drop_f = _ols(x[:-1], y[:-1])[0]
    return DimensionEstimate(scales, counts, slope, intercept, r2, se, drop_c, drop_f)


# --------------------------------------------------------------------------
# box counting


def _box_keys(points: np.ndarray, extent, scale: float, shift=(0.0, 0.0)) -> np.ndarray:
    x0, y0, x1, y1 = extent
    nx = max(1, math.ceil((x1 - x0) / scale - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / scale - 1e-9))
    ix = np.floor((points[:, 0] - x0 + shift[0]) / scale).astype(np.int64)
    iy = np.floor((points[:, 1] - y0 + shift[1]) / scale).astype(np.int64)
    if shift == (0.0, 0.0):
        # the far edge belongs to the last box
        ix = np.minimum(ix, nx - 1)
        iy = np.minimum(iy, ny - 1)
    return iy * (nx + 2) + ix


def _check_points(points, extent):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("empty point set")
    x0, y0, x1, y1 = extent
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate extent")
    if np.any(pts[:, 0] < x0) or np.any(pts[:, 0] > x1) or np.any(pts[:, 1] < y0) or np.any(pts[:, 1] > y1):
        raise ValueError("points outside the extent")
    return pts


def dyadic_scales(extent, min_scale: float, max_scale: float) -> np.ndarray:
    """Scales ``width * 2^-k`` lying in ``[min_scale, max_scale]``, descending."""
    width = extent[2] - extent[0]
    ks = np.arange(0, 64)
    s = width * 2.0 ** (-ks)
    s = s[(s >= min_scale * (1 - 1e-12)) & (s <= max_scale * (1 + 1e-12))]
    return s


def box_count(points, extent, scales, *, min_scale: float = 0.0, offsets: bool = False):
    """Number of occupied boxes of side ``scale`` for each scale.

    Boxes tile ``extent = (x0, y0, x1, y1)`` from its lower-left corner;
    each box is half-open except that points on the far edge of the extent
    belong to the last box.  With ``offsets`` the counts are averaged over the
    four grids shifted by half a box in x and/or y.

    Returns a list of ``(scale, count)`` pairs.
    """
    pts = _check_points(points, extent)
    width = min(extent[2] - extent[0], extent[3] - extent[1])
    out = []
    for s in np.atleast_1d(np.asarray(scales, dtype=float)):
        if not (min_scale < s <= width):
            raise ValueError(f"scale {s} outside ({min_scale}, {width}]")
        if offsets:
            c = np.mean([np.unique(_box_keys(pts, extent, s, (dx, dy))).size
                         for dx in (0.0, s / 2) for dy in (0.0, s / 2)])
        else:
            c = int(np.unique(_box_keys(pts, extent, s)).size)
        out.append((float(s), c))
    return out


def box_dimension(points, extent, scales, **kw) -> DimensionEstimate:
    return fit_dimension(box_count(points, extent, scales, **kw))


# --------------------------------------------------------------------------
# quantum (metric) covers


def quantum_cover(boundary, w: WeightGrid, r: float) -> np.ndarray:
    """Centres of the greedy cover of ``boundary`` by metric balls of radius ``r``.

    Centres are picked as the lowest-index (row-major) uncovered cell.
    """
    if not r > 0:
        raise ValueError("cover radius must be positive")
    cells = as_cells(boundary, w.shape)
    if cells.shape[0] == 0:
        raise ValueError("empty boundary")
    flat = np.unique(cells[:, 0] * w.shape[1] + cells[:, 1])
    centres = _kernels.greedy_cover(np.ascontiguousarray(w.cell_cost), float(w.spacing),
                                    w.n_neigh, w.geo, flat, float(r))
    return np.column_stack([centres // w.shape[1], centres % w.shape[1]])


def verify_cover(boundary, w: WeightGrid, centres, r: float) -> bool:
    """Independent check that every boundary cell is within ``r`` of a centre."""
    cells = as_cells(boundary, w.shape)
    d = shortest_distances(w, centres, cutoff=r)
    return bool(np.all(np.isfinite(d.dist[cells[:, 0], cells[:, 1]])))


def quantum_cover_count(boundary, w: WeightGrid, r: float, *, check: bool = False) -> int:
    centres = quantum_cover(boundary, w, r)
    if check and not verify_cover(boundary, w, centres, r):
        raise AssertionError("greedy cover failed to cover the boundary")
    return int(centres.shape[0])


def quantum_dimension(boundary, w: WeightGrid, r_scales, *, check: bool = False) -> DimensionEstimate:
    """Fit of greedy cover counts against cover radius.

    A cover at radius ``r'`` is also a cover at any ``r > r'``, so each
    count is replaced by the smallest count found at radii ``<= r``.
    """
    r_scales = np.sort(np.asarray(r_scales, dtype=float))
    if r_scales.size < 3:
        raise ValueError("need at least 3 cover radii")
    counts = np.array([quantum_cover_count(boundary, w, r, check=check) for r in r_scales])
    counts = np.minimum.accumulate(counts)
    return fit_dimension(list(zip(r_scales, counts)))


def diameter_sum_profile(boundary, w: WeightGrid, extent, scales, ps) -> np.ndarray:
    """Exponent of ``sum over occupied boxes of diam^p`` against ``log(1/scale)``.

    Returns the fitted slope for each moment order ``p``.  The order at which
    the slope crosses zero is a secondary estimate of the quantum dimension.
    """
    cells = as_cells(boundary, w.shape)
    f = w.source_field
    pts = f.cell_xy(cells)
    X, Y = f.meshgrid()
    ps = np.asarray(ps, dtype=float)
    log_sums = np.empty((len(scales), ps.size))
    for i, s in enumerate(scales):
        keys = _box_keys(pts, extent, s)
        diams = []
        nx = max(1, math.ceil((extent[2] - extent[0]) / s - 1e-9))
        for key in np.unique(keys):
            iy, ix = divmod(int(key), nx + 2)
            bx0 = extent[0] + ix * s
            by0 = extent[1] + iy * s
            region = (X >= bx0) & (X < bx0 + s) & (Y >= by0) & (Y < by0 + s)
            diams.append(internal_diameter(w, region).value)
        diams = np.asarray(diams)
        log_sums[i] = [np.log(np.sum(diams ** pp)) for pp in ps]
    x = np.log(1.0 / np.asarray(scales, dtype=float))
    return np.array([stats.linregress(x, log_sums[:, j]).slope for j in range(ps.size)])


def zero_crossing(ps, slopes) -> float:
    """Linear interpolation of the first sign change of ``slopes`` in ``ps``."""
    ps = np.asarray(ps, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    for i in range(ps.size - 1):
        a, b = slopes[i], slopes[i + 1]
        if a == 0:
            return float(ps[i])
        if a * b < 0:
            return float(ps[i] + (ps[i + 1] - ps[i]) * a / (a - b))
    return float("nan")
