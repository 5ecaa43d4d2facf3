"""Discrete Gaussian free field on the square [-1, 1]^2.

The field lives on the ``n x n`` cell centres ``-1 + (i + 1/2) * spacing``
with ``spacing = 2/n`` and zero Dirichlet data just outside the frame.  It is
sampled exactly in the sine eigenbasis of the discrete Dirichlet Laplacian:
``h = S diag(lambda^{-1/2}) g`` with ``S`` the orthonormal DST-I matrix and
``g`` i.i.d. standard normals, so ``Cov(h) = L^{-1}`` before calibration.

Arrays are indexed ``values[row, col]`` with rows along ``y`` and columns
along ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft
from scipy import stats

# Multiplier turning the raw lattice field into one whose circle averages have
# variance slope 1 against log(1/r).  Measured with ``calibrate(512, 8000,
# seed=20240601)`` on the raw sampler (statistical error about 1%); near
# sqrt(2*pi), as expected for a lattice Green's function ~ log(1/r) / (2*pi).
DEFAULT_CALIBRATION = 2.4763

MAX_CELLS = 1 << 26
MIN_N = 8


@dataclass(frozen=True)
class Normalization:
    """``kind`` is ``"raw"`` (zero boundary) or ``"pinned"``.

    ``"pinned"`` subtracts the circle average over radius ``radius`` around the
    origin, mirroring the unit-circle normalisation of the whole-plane field.
    """

    kind: str = "raw"
    radius: float | None = None

    def __post_init__(self):
        if self.kind == "raw":
            if self.radius is not None:
                raise ValueError("raw normalization takes no radius")
        elif self.kind == "pinned":
            if self.radius is None or not self.radius > 0:
                raise ValueError("pinned normalization needs a positive radius")
        else:
            raise ValueError(f"unknown normalization {self.kind!r}")

    @classmethod
    def pinned(cls, radius: float) -> "Normalization":
        return cls("pinned", float(radius))

    @property
    def tag(self) -> int:
        return 0 if self.kind == "raw" else 1


RAW = Normalization()


@dataclass(frozen=True, eq=False)
class FieldGrid:
    n: int
    spacing: float
    values: np.ndarray = field(repr=False)
    seed: int | None
    calibration: float = 1.0
    normalization: Normalization = RAW
    derived: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.n, self.n):
            raise ValueError(f"values must have shape {(self.n, self.n)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if v is self.values:
            v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """``(x0, y0, x1, y1)`` of the square covered by the cells."""
        return (-1.0, -1.0, 1.0, 1.0)

    def coords(self) -> np.ndarray:
        """1-D cell-centre coordinates (same along both axes)."""
        return cell_centres(self.n)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.coords()
        return np.meshgrid(c, c)  # (X, Y) with X varying along columns

    def origin_cell(self) -> tuple[int, int]:
        return (self.n // 2, self.n // 2)

    def cell_xy(self, cells) -> np.ndarray:
        """Centres of ``cells`` given as ``(row, col)`` pairs, returned as ``(x, y)``."""
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
        c = self.coords()
        return np.column_stack([c[cells[:, 1]], c[cells[:, 0]]])

    def nearest_cell(self, x: float, y: float) -> tuple[int, int]:
        col = int(np.clip(np.floor((x + 1.0) / self.spacing), 0, self.n - 1))
        row = int(np.clip(np.floor((y + 1.0) / self.spacing), 0, self.n - 1))
        return (row, col)

    def with_values(self, values, **changes) -> "FieldGrid":
        return replace(self, values=np.asarray(values, dtype=np.float64), **changes)


def cell_centres(n: int) -> np.ndarray:
    return -1.0 + (np.arange(n) + 0.5) * (2.0 / n)


def laplacian_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues ``4 - 2cos(pi k/(n+1)) - 2cos(pi l/(n+1))`` of the Dirichlet Laplacian."""
    mu = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, n + 1) / (n + 1))
    return mu[:, None] + mu[None, :]


def _spectral_map(noise: np.ndarray) -> np.ndarray:
    """Apply ``S diag(lambda^{-1/2})`` to a block of ``(..., n, n)`` noise arrays."""
    n = noise.shape[-1]
    scaled = noise / np.sqrt(laplacian_eigenvalues(n))
    return sfft.dstn(scaled, type=1, norm="ortho", axes=(-2, -1))


def spectral_covariance(n: int) -> np.ndarray:
    """Exact covariance of the raw sampler, obtained by pushing every unit
    noise vector through the sampler's own linear map.

    Returns an ``(n*n, n*n)`` matrix in row-major cell order.
    """
    if n * n > 4096:
        raise ValueError("spectral_covariance is intended for small grids (n <= 64)")
    basis = np.eye(n * n).reshape(n * n, n, n)
    cols = _spectral_map(basis).reshape(n * n, n * n)  # row k = image of e_k
    return cols.T @ cols


def _check_size(n: int, max_cells: int) -> None:
    if n < MIN_N:
        raise ValueError(f"n must be at least {MIN_N}, got {n}")
    if n * n > max_cells:
        raise MemoryError(f"grid of {n}x{n} cells exceeds the cap of {max_cells} cells")


def raw_sample(n: int, seed: int, max_cells: int = MAX_CELLS) -> np.ndarray:
    _check_size(n, max_cells)
    rng = np.random.default_rng(seed)
    return _spectral_map(rng.standard_normal((n, n)))


def sample_field(
    n: int,
    seed: int,
    normalization: Normalization = RAW,
    *,
    calibration: float = DEFAULT_CALIBRATION,
    max_cells: int = MAX_CELLS,
) -> FieldGrid:
    """Sample a calibrated zero-boundary discrete GFF.

    Identical ``(n, seed, normalization, calibration)`` give bit-identical
    values.
    """
    if not calibration > 0:
        raise ValueError("calibration must be positive")
    values = calibration * raw_sample(n, seed, max_cells)
    f = FieldGrid(n, 2.0 / n, values, int(seed), float(calibration), RAW)
    if normalization.kind == "pinned":
        c = circle_average(f, (0.0, 0.0), normalization.radius)
        f = f.with_values(values - c, normalization=normalization)
    return f


def zero_field(n: int, seed: int | None = None) -> FieldGrid:
    return FieldGrid(n, 2.0 / n, np.zeros((n, n)), seed, 1.0, RAW, derived=seed is None)


# --------------------------------------------------------------------------
# circle averages


def n_circle_points(r: float, spacing: float) -> int:
    return max(64, math.ceil(2.0 * math.pi * r / spacing))


def _bilinear(values: np.ndarray, spacing: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    fx = (x + 1.0) / spacing - 0.5
    fy = (y + 1.0) / spacing - 0.5
    j0 = np.clip(np.floor(fx).astype(np.int64), 0, n - 2)
    i0 = np.clip(np.floor(fy).astype(np.int64), 0, n - 2)
    tx = fx - j0
    ty = fy - i0
    v00 = values[i0, j0]
    v01 = values[i0, j0 + 1]
    v10 = values[i0 + 1, j0]
    v11 = values[i0 + 1, j0 + 1]
    return (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11)


def _check_circle(n: int, spacing: float, centres: np.ndarray, r: float) -> None:
    if r < 2.0 * spacing - 1e-12:
        raise ValueError(f"radius {r} is below the resolution 2*spacing = {2 * spacing}")
    lo = -1.0 + 0.5 * spacing
    hi = 1.0 - 0.5 * spacing
    if np.any(centres - r < lo - 1e-12) or np.any(centres + r > hi + 1e-12):
        raise ValueError(f"circle of radius {r} leaves the grid")


def circle_averages(f: FieldGrid, centres, radii) -> np.ndarray:
    """Circle averages for every (centre, radius) pair.

    ``centres`` is ``(k, 2)`` in ``(x, y)`` domain units.  Returns a
    ``(k, len(radii))`` array.
    """
    centres = np.asarray(centres, dtype=float).reshape(-1, 2)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    out = np.empty((centres.shape[0], radii.size))
    for j, r in enumerate(radii):
        _check_circle(f.n, f.spacing, centres, r)
        m = n_circle_points(r, f.spacing)
        theta = 2.0 * np.pi * np.arange(m) / m
        ox, oy = r * np.cos(theta), r * np.sin(theta)
        # chunk over centres to bound memory
        step = max(1, 2_000_000 // m)
        for s in range(0, centres.shape[0], step):
            c = centres[s:s + step]
            vals = _bilinear(f.values, f.spacing, c[:, :1] + ox, c[:, 1:] + oy)
            out[s:s + step, j] = vals.mean(axis=1)
    return out


def circle_average(f: FieldGrid, z, r: float) -> float:
    """Mean of the bilinearly interpolated field over the circle ``|w - z| = r``."""
    return float(circle_averages(f, np.asarray(z, dtype=float).reshape(1, 2), [r])[0, 0])


# --------------------------------------------------------------------------
# deterministic perturbations


def smoothstep(t):
    """C^2 quintic ramp: 0 at t <= 0, 1 at t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


@dataclass(frozen=True)
class RadialBump:
    """Ring-shaped bump: 1 on radii [2s, 3s], 0 below s and above 4s."""

    center: tuple[float, float]
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("bump scale must be positive")

    def radius(self, x, y):
        return np.hypot(np.asarray(x) - self.center[0], np.asarray(y) - self.center[1])

    def profile(self, r):
        s = self.scale
        r = np.asarray(r, dtype=float)
        up = smoothstep((r - s) / s)
        down = smoothstep((4.0 * s - r) / s)
        out = np.where(r < 2.0 * s, up, np.where(r > 3.0 * s, down, 1.0))
        return out

    def __call__(self, x, y):
        return self.profile(self.radius(x, y))

    def on_grid(self, f: FieldGrid) -> np.ndarray:
        X, Y = f.meshgrid()
        return self(X, Y)

    def plateau_mask(self, f: FieldGrid) -> np.ndarray:
        X, Y = f.meshgrid()
        r = self.radius(X, Y)
        return (r >= 2.0 * self.scale) & (r <= 3.0 * self.scale)


def add_function(f: FieldGrid, g) -> FieldGrid:
    """Pointwise ``f + g``; ``g`` is a callable ``g(X, Y)``, an array or a scalar."""
    if callable(g):
        X, Y = f.meshgrid()
        extra = np.broadcast_to(np.asarray(g(X, Y), dtype=float), f.shape)
    else:
        extra = np.broadcast_to(np.asarray(g, dtype=float), f.shape)
    if not np.all(np.isfinite(extra)):
        raise ValueError("added function must be finite on the grid")
    return f.with_values(f.values + extra, derived=True)


def log_singularity(alpha: float, z0) -> callable:
    """``alpha * log(1/|w - z0|)``, useful for planting an alpha-thick point."""
    x0, y0 = float(z0[0]), float(z0[1])

    def g(X, Y):
        return -alpha * np.log(np.hypot(X - x0, Y - y0))

    return g


# --------------------------------------------------------------------------
# calibration


def default_calibration_radii(n: int, r_max: float = 0.25, count: int = 12) -> np.ndarray:
    spacing = 2.0 / n
    r_min = 8.0 * spacing
    if r_min >= r_max:
        raise ValueError(f"grid n={n} too coarse for the calibration radius window")
    return np.geomspace(r_min, r_max, count)


def circle_average_variances(
    n: int, replicates: int, seed: int, calibration: float = 1.0, radii=None
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical variance of ``h_r(0)`` across replicates for each radius."""
    radii = default_calibration_radii(n) if radii is None else np.asarray(radii, dtype=float)
    ss = np.random.SeedSequence(seed)
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(replicates)]
    avgs = np.empty((replicates, radii.size))
    origin = np.zeros((1, 2))
    for k, sd in enumerate(seeds):
        f = FieldGrid(n, 2.0 / n, calibration * raw_sample(n, sd), sd, calibration)
        avgs[k] = circle_averages(f, origin, radii)[0]
    return radii, avgs.var(axis=0, ddof=1)


def calibrate(n: int, replicates: int, seed: int, calibration: float = 1.0, radii=None) -> float:
    """Factor that would bring the circle-average variance slope to 1.

    Regresses ``Var h_r(0)`` on ``log(1/r)`` for fields produced with the
    given ``calibration`` multiplier and returns ``slope ** -0.5``.  A
    sampler that is already calibrated yields a factor near 1.
    """
    if replicates < 100:
        raise ValueError("calibration needs at least 100 replicates")
    radii, var = circle_average_variances(n, replicates, seed, calibration, radii)
    t = np.log(1.0 / radii)
    if np.ptp(t) == 0:
        raise ValueError("degenerate calibration regression")
    slope = stats.linregress(t, var).slope
    if not slope > 0:
        raise ValueError(f"degenerate calibration regression (slope {slope})")
    return float(slope ** -0.5)
