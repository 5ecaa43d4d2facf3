"""Discrete LQG metric: exponentiated-field first-passage distances on the grid.

A field ``h`` and exponent ``xi`` give each cell the cost ``exp(xi * h)``.
Neighbouring cells are joined by edges whose cost is the Euclidean edge
length times the (arithmetic or geometric) mean of the two cell costs.  No
global ``eps``-power prefactor is applied; box-counting slopes do not see a
global multiplicative constant.

Cell sets are ``(k, 2)`` integer arrays of ``(row, col)`` pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .formulas import GammaParams
from .gff import FieldGrid, RadialBump, add_function

TOPOLOGIES = {"eight": 8, "four": 4}
EDGE_RULES = ("arith", "geo")

_MAX_EXP = math.log(np.finfo(np.float64).max)
_MIN_EXP = math.log(np.finfo(np.float64).tiny)


def as_cells(cells, shape) -> np.ndarray:
    """Validate a cell set and return it as a ``(k, 2)`` int64 array."""
    arr = np.asarray(cells, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    arr = arr.reshape(-1, 2)
    nr, nc = shape
    if np.any(arr[:, 0] < 0) or np.any(arr[:, 0] >= nr) or np.any(arr[:, 1] < 0) or np.any(arr[:, 1] >= nc):
        raise ValueError("cell outside the grid")
    return arr


def flat_index(cells, shape) -> np.ndarray:
    cells = as_cells(cells, shape)
    return cells[:, 0] * shape[1] + cells[:, 1]


def cells_from_mask(mask) -> np.ndarray:
    return np.argwhere(np.asarray(mask, dtype=bool)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class WeightGrid:
    source_field: FieldGrid
    xi: float
    cell_cost: np.ndarray = field(repr=False)
    topology: str = "eight"
    edge_rule: str = "arith"

    @property
    def spacing(self) -> float:
        return self.source_field.spacing

    @property
    def shape(self) -> tuple[int, int]:
        return self.cell_cost.shape

    @property
    def n_neigh(self) -> int:
        return TOPOLOGIES[self.topology]

    @property
    def geo(self) -> bool:
        return self.edge_rule == "geo"

    def edge_cost(self, u, v) -> float:
        """Cost of the edge between neighbouring cells ``u`` and ``v``."""
        (r0, c0), (r1, c1) = u, v
        dr, dc = abs(r1 - r0), abs(c1 - c0)
        if max(dr, dc) != 1 or (dr and dc and self.topology == "four"):
            raise ValueError(f"cells {u} and {v} are not neighbours")
        return float(_kernels.edge_weight(self.cell_cost[u], self.cell_cost[v], self.spacing,
                                          math.sqrt(2.0) if dr and dc else 1.0, self.geo))


def build_weights(f: FieldGrid, p: GammaParams | float, *, topology: str = "eight",
                  edge_rule: str = "arith") -> WeightGrid:
    """Cell costs ``exp(xi * h)``; ``p`` is a :class:`GammaParams` or ``xi`` itself."""
    if topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {topology!r}")
    if edge_rule not in EDGE_RULES:
        raise ValueError(f"unknown edge rule {edge_rule!r}")
    xi = p.xi if isinstance(p, GammaParams) else float(p)
    expo = xi * f.values
    lo, hi = float(expo.min()), float(expo.max())
    if hi > _MAX_EXP or lo < _MIN_EXP:
        raise OverflowError(f"xi*h range [{lo:.3g}, {hi:.3g}] leaves the float exponent range")
    cost = np.exp(expo)
    cost.flags.writeable = False
    return WeightGrid(f, xi, cost, topology, edge_rule)


@dataclass(frozen=True, eq=False)
class DistanceField:
    source: np.ndarray
    dist: np.ndarray = field(repr=False)
    visited_all: bool
    cutoff: float | None = None
    pred: np.ndarray | None = field(default=None, repr=False)

    @property
    def reached(self) -> np.ndarray:
        return np.isfinite(self.dist)

    def path_to(self, cell) -> list[tuple[int, int]]:
        """Cells of a shortest path from the source set to ``cell``."""
        if self.pred is None:
            raise ValueError("distances were computed without predecessors")
        nc = self.dist.shape[1]
        v = int(cell[0]) * nc + int(cell[1])
        if not np.isfinite(self.dist.flat[v]):
            raise ValueError("cell not reached")
        out = []
        while v >= 0:
            out.append((v // nc, v % nc))
            v = int(self.pred[v])
        return out[::-1]


def _dijkstra(cost, spacing, n_neigh, geo, sources_flat, cutoff=None, allowed=None, predecessors=False):
    n_cells = cost.size
    dist = np.full(n_cells, np.inf)
    pred = np.full(n_cells, -1, dtype=np.int64) if predecessors else np.empty(0, dtype=np.int64)
    touched = np.empty(n_cells, dtype=np.int64)
    if allowed is None:
        allowed_arr, use_allowed = np.empty(0, dtype=np.bool_), False
    else:
        allowed_arr, use_allowed = np.ascontiguousarray(allowed, dtype=np.bool_).ravel(), True
    _kernels.run_dijkstra(np.ascontiguousarray(cost), float(spacing), n_neigh, geo,
                          np.ascontiguousarray(sources_flat, dtype=np.int64),
                          np.inf if cutoff is None else float(cutoff),
                          allowed_arr, use_allowed, dist, pred, predecessors, touched)
    return dist.reshape(cost.shape), (pred if predecessors else None)


def shortest_distances(w: WeightGrid, sources, cutoff: float | None = None, *,
                       predecessors: bool = False, allowed=None) -> DistanceField:
    """Exact multi-source shortest-path distances on the grid graph.

    With ``cutoff`` only cells at distance ``<= cutoff`` are reported; the
    rest are ``inf``.  ``allowed`` restricts paths to a boolean cell mask.
    """
    cells = as_cells(sources, w.shape)
    if cells.shape[0] == 0:
        raise ValueError("empty source set")
    if allowed is not None:
        allowed = np.asarray(allowed, dtype=bool)
        if not np.all(allowed[cells[:, 0], cells[:, 1]]):
            raise ValueError("source cell outside the allowed region")
    flat = cells[:, 0] * w.shape[1] + cells[:, 1]
    dist, pred = _dijkstra(w.cell_cost, w.spacing, w.n_neigh, w.geo, flat, cutoff, allowed, predecessors)
    dist.flags.writeable = False
    return DistanceField(cells, dist, bool(np.all(np.isfinite(dist))), cutoff, pred)


def distance_between(w: WeightGrid, k1, k2, *, allowed=None) -> float:
    """Shortest distance between two cell sets."""
    d = shortest_distances(w, k1, allowed=allowed)
    k2 = as_cells(k2, w.shape)
    return float(d.dist[k2[:, 0], k2[:, 1]].min())


# --------------------------------------------------------------------------
# metric balls


@dataclass(frozen=True, eq=False)
class MetricBall:
    radius_s: float
    mask: np.ndarray = field(repr=False)
    boundary: np.ndarray = field(repr=False)
    touches_frame: bool

    @property
    def boundary_mask(self) -> np.ndarray:
        out = np.zeros_like(self.mask)
        out[self.boundary[:, 0], self.boundary[:, 1]] = True
        return out


def ball_boundary_mask(mask: np.ndarray) -> np.ndarray:
    """In-ball cells with at least one in-grid 4-neighbour outside the ball."""
    mask = np.asarray(mask, dtype=bool)
    out_nb = np.zeros_like(mask)
    out_nb[1:, :] |= ~mask[:-1, :]
    out_nb[:-1, :] |= ~mask[1:, :]
    out_nb[:, 1:] |= ~mask[:, :-1]
    out_nb[:, :-1] |= ~mask[:, 1:]
    return mask & out_nb


def touches_frame(mask: np.ndarray) -> bool:
    return bool(mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())


def metric_ball(d: DistanceField, s: float) -> MetricBall:
    """Cells within distance ``s`` of the source set and their boundary.

    Frame cells are never treated as boundary on account of the frame; a
    ball meeting the frame is flagged via ``touches_frame``.
    """
    if not s > 0:
        raise ValueError("ball radius must be positive")
    if d.cutoff is not None and s > d.cutoff:
        raise ValueError("ball radius exceeds the cutoff the distances were computed with")
    mask = d.dist <= s
    mask.flags.writeable = False
    boundary = cells_from_mask(ball_boundary_mask(mask))
    return MetricBall(float(s), mask, boundary, touches_frame(mask))


# --------------------------------------------------------------------------
# internal diameters


EXACT_DIAMETER_CELLS = 64


class DiameterEstimate(NamedTuple):
    value: float
    lower_bound: bool
    endpoints: tuple


def _region_mask(region, shape) -> np.ndarray:
    region = np.asarray(region)
    if region.dtype == bool and region.shape == tuple(shape):
        return region
    cells = as_cells(region, shape)
    m = np.zeros(shape, dtype=bool)
    m[cells[:, 0], cells[:, 1]] = True
    return m


def internal_diameter(w: WeightGrid, region) -> DiameterEstimate:
    """Diameter of ``region`` in its internal metric.

    Regions of at most ``EXACT_DIAMETER_CELLS`` cells are solved exactly
    (``lower_bound=False``).  Larger regions use the two-sweep heuristic:
    sweep once from the first region cell to find the farthest cell ``a``,
    then report the eccentricity of ``a``, a lower bound on the diameter.
    """
    mask = _region_mask(region, w.shape)
    idx = np.argwhere(mask)
    if idx.shape[0] == 0:
        raise ValueError("empty region")
    if idx.shape[0] == 1:
        c = (int(idx[0, 0]), int(idx[0, 1]))
        return DiameterEstimate(0.0, True, (c, c))
    (r0, c0), (r1, c1) = idx.min(axis=0), idx.max(axis=0) + 1
    sub_mask = mask[r0:r1, c0:c1]
    sub_cost = w.cell_cost[r0:r1, c0:c1]
    nc = c1 - c0
    start = (idx[0, 0] - r0) * nc + (idx[0, 1] - c0)
    d1, _ = _dijkstra(sub_cost, w.spacing, w.n_neigh, w.geo, [start], allowed=sub_mask)
    vals = d1[sub_mask]
    if not np.all(np.isfinite(vals)):
        raise ValueError("region is not connected in the grid graph")
    if idx.shape[0] <= EXACT_DIAMETER_CELLS:
        # small regions: exact eccentricity of every cell
        best, ends = -1.0, None
        for u in np.flatnonzero(sub_mask.ravel()):
            du, _ = _dijkstra(sub_cost, w.spacing, w.n_neigh, w.geo, [u], allowed=sub_mask)
            v = int(np.argmax(np.where(sub_mask, du, -1.0)))
            if du.flat[v] > best:
                best, ends = float(du.flat[v]), (u, v)
        (a, b) = ends
        return DiameterEstimate(best, False, ((a // nc + r0, a % nc + c0), (b // nc + r0, b % nc + c0)))
    a = int(np.argmax(np.where(sub_mask, d1, -1.0)))
    d2, _ = _dijkstra(sub_cost, w.spacing, w.n_neigh, w.geo, [a], allowed=sub_mask)
    b = int(np.argmax(np.where(sub_mask, d2, -1.0)))
    ends = ((a // nc + r0, a % nc + c0), (b // nc + r0, b % nc + c0))
    return DiameterEstimate(float(d2.flat[b]), True, ends)


def euclidean_ball_cells(f: FieldGrid, z, r: float) -> np.ndarray:
    """Mask of cells whose centres lie within Euclidean distance ``r`` of ``z``."""
    X, Y = f.meshgrid()
    return np.hypot(X - z[0], Y - z[1]) <= r


# --------------------------------------------------------------------------
# bump perturbation profile


@dataclass(frozen=True, eq=False)
class ThetaProfile:
    xs: np.ndarray
    thetas: np.ndarray
    bump: object
    annulus_gap: float


def annulus_sides(bump: RadialBump, f: FieldGrid, topology: str = "eight"):
    """Plateau mask plus its inner and outer boundary layers.

    A plateau cell is on the inner (outer) side when it has a grid neighbour
    off the plateau at radius below ``2*scale`` (above ``3*scale``).
    """
    plateau = bump.plateau_mask(f)
    X, Y = f.meshgrid()
    rad = bump.radius(X, Y)
    inside = ~plateau & (rad < 2.0 * bump.scale)
    outside = ~plateau & (rad > 3.0 * bump.scale)
    inner = np.zeros_like(plateau)
    outer = np.zeros_like(plateau)
    n = plateau.shape[0]
    for dr, dc in zip(_kernels.DR[:TOPOLOGIES[topology]], _kernels.DC[:TOPOLOGIES[topology]]):
        # shifted[i, j] = mask[i + dr, j + dc], False off-grid
        for src, dst in ((inside, inner), (outside, outer)):
            sh = np.zeros_like(src)
            rs = slice(max(0, -dr), n - max(0, dr))
            rd = slice(max(0, dr), n - max(0, -dr))
            cs = slice(max(0, -dc), n - max(0, dc))
            cd = slice(max(0, dc), n - max(0, -dc))
            sh[rs, cs] = src[rd, cd]
            dst |= plateau & sh
    return plateau, inner, outer, inside, outside


def theta_profile(f: FieldGrid, p: GammaParams, bump, xs, k1, k2, *,
                  topology: str = "eight", edge_rule: str = "arith",
                  check_separation: bool = True) -> ThetaProfile:
    """Distances ``theta(x) = D_{h + x*phi}(k1, k2)`` for each ``x`` in ``xs``.

    ``bump`` is any callable profile ``phi(X, Y)`` with values in [0, 1].
    For a :class:`RadialBump` the plateau-crossing distance ``annulus_gap``
    (distance between the plateau's inner and outer sides inside the plateau,
    under the unperturbed field) is also reported; otherwise it is ``nan``.

    With ``check_separation`` the plateau must separate ``k1`` (inner side)
    from ``k2`` (outer side) in the grid graph.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("xs must be a non-empty 1-D sequence")
    k1 = as_cells(k1, f.shape)
    k2 = as_cells(k2, f.shape)
    if k1.shape[0] == 0 or k2.shape[0] == 0:
        raise ValueError("empty source or target set")
    w0 = build_weights(f, p, topology=topology, edge_rule=edge_rule)

    gap = float("nan")
    if isinstance(bump, RadialBump):
        plateau, inner, outer, inside, outside = annulus_sides(bump, f, topology)
        if check_separation:
            if not (np.all(inside[k1[:, 0], k1[:, 1]]) and np.all(outside[k2[:, 0], k2[:, 1]])):
                raise ValueError("k1 must lie inside the plateau annulus and k2 outside it")
            reach = shortest_distances(w0, k1, allowed=~plateau).dist
            if np.any(np.isfinite(reach[k2[:, 0], k2[:, 1]])):
                raise ValueError("plateau annulus does not separate k1 from k2")
        if inner.any() and outer.any():
            d_in = shortest_distances(w0, cells_from_mask(inner), allowed=plateau).dist
            gap = float(d_in[outer].min())
    elif check_separation:
        raise ValueError("separation can only be checked for a RadialBump")

    phi = np.asarray(bump(*f.meshgrid()), dtype=float)
    thetas = np.empty(xs.size)
    for i, x in enumerate(xs):
        fx = add_function(f, x * phi) if x != 0.0 else f
        wx = build_weights(fx, p, topology=topology, edge_rule=edge_rule)
        thetas[i] = distance_between(wx, k1, k2)
    return ThetaProfile(xs, thetas, bump, gap)
