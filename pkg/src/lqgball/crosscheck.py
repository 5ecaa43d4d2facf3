"""Cross-check suite: fast paths against the brute-force oracles.

Each check returns a :class:`Check`; :func:`run_all` runs the lot.  Used by
the ``oracle-check`` command and by the test-suite.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import fractal, oracle
from .gff import FieldGrid, spectral_covariance, zero_field
from .metric import build_weights, shortest_distances


class Check(NamedTuple):
    name: str
    passed: bool
    detail: str


def _random_field(rng, m: int, scale: float = 1.5) -> FieldGrid:
    return FieldGrid(m, 2.0 / m, scale * rng.standard_normal((m, m)), None)


def check_dijkstra(instances: int = 100, m: int = 6, seed: int = 1, rtol: float = 1e-12) -> Check:
    """All-sources Dijkstra rows against Floyd-Warshall over every topology / edge rule."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        f = _random_field(rng, m)
        topology = ("eight", "four")[i % 2]
        rule = ("arith", "geo")[(i // 2) % 2]
        w = build_weights(f, float(rng.uniform(0.2, 1.0)), topology=topology, edge_rule=rule)
        D = oracle.floyd_warshall(w)
        for src in range(m * m):
            d = shortest_distances(w, [divmod(src, m)]).dist.ravel()
            ref = D[src]
            err = np.abs(d - ref) / np.maximum(np.abs(ref), 1e-300)
            err[src] = abs(d[src] - ref[src])
            worst = max(worst, float(err.max()))
    return Check("dijkstra_vs_floyd_warshall", worst <= rtol,
                 f"{instances} instances of {m}x{m}; max relative error {worst:.3g} (tol {rtol:g})")


def check_green(n: int = 16, atol: float = 1e-8) -> Check:
    """Exact sampler covariance against the dense inverse Laplacian."""
    diff = float(np.abs(spectral_covariance(n) - oracle.dense_green(n)).max())
    return Check("sampler_covariance_vs_dense_green", diff <= atol,
                 f"n={n}; max abs difference {diff:.3g} (tol {atol:g})")


def check_green_hand() -> Check:
    G = oracle.dense_green(3, dim=1)
    ref = np.array([[3, 2, 1], [2, 4, 2], [1, 2, 3]]) / 4.0
    diff = float(np.abs(G - ref).max())
    return Check("dense_green_hand_case", diff <= 1e-14, f"3-node path; max abs difference {diff:.3g}")


def check_box_count(instances: int = 50, seed: int = 2) -> Check:
    """Fast box counts against exhaustive enumeration on random point sets."""
    rng = np.random.default_rng(seed)
    ext = (-0.5, -0.5, 0.5, 0.5)
    scales = fractal.dyadic_scales(ext, 1.0 / 64, 1.0)
    bad = 0
    for i in range(instances):
        k = int(rng.integers(1, 2000))
        if i % 2:
            # lattice-aligned points, including the extent's edges
            pts = rng.integers(0, 129, size=(k, 2)) / 128.0 - 0.5
        else:
            pts = rng.uniform(-0.5, 0.5, size=(k, 2))
        fast = dict(fractal.box_count(pts, ext, scales))
        for s in scales:
            if fast[s] != oracle.exhaustive_box_count(pts, s, ext):
                bad += 1
    return Check("box_count_vs_exhaustive", bad == 0,
                 f"{instances} random sets x {scales.size} scales; {bad} mismatches")


def check_weyl(instances: int = 20, n: int = 32, seed: int = 3, rtol: float = 1e-12) -> Check:
    """Adding a constant ``c`` to the field multiplies distances by ``exp(xi c)``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        f = _random_field(rng, n, 1.0)
        xi = float(rng.uniform(0.2, 0.8))
        c = float(rng.uniform(-2.0, 2.0))
        src = [tuple(rng.integers(0, n, 2))]
        d0 = shortest_distances(build_weights(f, xi), src).dist
        d1 = shortest_distances(build_weights(f.with_values(f.values + c), xi), src).dist
        ref = math.exp(xi * c) * d0
        mask = ref > 0
        worst = max(worst, float(np.max(np.abs(d1[mask] - ref[mask]) / ref[mask])))
    return Check("weyl_constant_shift", worst <= rtol,
                 f"{instances} instances; max relative error {worst:.3g} (tol {rtol:g})")


def check_uniform_2x2() -> Check:
    w = build_weights(zero_field(8), 0.5)
    D = oracle.floyd_warshall(w.cell_cost[:2, :2], w.spacing)
    h = w.spacing
    ok = math.isclose(D[0, 1], h, rel_tol=1e-15) and math.isclose(D[0, 3], h * math.sqrt(2), rel_tol=1e-15)
    return Check("floyd_warshall_uniform_2x2", ok, f"axis {D[0, 1]:.6g}, diagonal {D[0, 3]:.6g}")


ALL = (check_green_hand, check_uniform_2x2, check_dijkstra, check_green, check_box_count, check_weyl)


def run_all() -> list[Check]:
    return [fn() for fn in ALL]
