"""Brute-force references for cross-checking the fast paths.

Nothing here imports the modules it validates: edge costs, Laplacians and
box membership are recomputed from scratch with plain loops.
"""

from __future__ import annotations

import math

import numpy as np

MAX_FW_SIDE = 8
MAX_GREEN_SIDE = 24
MAX_BOX_POINTS = 10_000


def _edge_cost(cu: float, cv: float, spacing: float, diagonal: bool, geo: bool) -> float:
    length = math.sqrt(2.0) if diagonal else 1.0
    mean = math.sqrt(cu * cv) if geo else 0.5 * (cu + cv)
    return spacing * length * mean


def floyd_warshall(cost, spacing: float = 1.0, *, topology: str = "eight", edge_rule: str = "arith") -> np.ndarray:
    """All-pairs shortest paths on an ``m x m`` grid of cell costs, ``m <= 8``.

    ``cost`` may also be a weight grid exposing ``cell_cost``, ``spacing``,
    ``topology`` and ``edge_rule``.  Returns an ``(m*m, m*m)`` matrix in
    row-major cell order.
    """
    if hasattr(cost, "cell_cost"):
        spacing, topology, edge_rule = cost.spacing, cost.topology, cost.edge_rule
        cost = cost.cell_cost
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost must be a square grid")
    m = c.shape[0]
    if m > MAX_FW_SIDE:
        raise ValueError(f"Floyd-Warshall oracle limited to {MAX_FW_SIDE}x{MAX_FW_SIDE} grids")
    geo = edge_rule == "geo"
    N = m * m
    D = np.full((N, N), np.inf)
    np.fill_diagonal(D, 0.0)
    for r in range(m):
        for col in range(m):
            u = r * m + col
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    diagonal = dr != 0 and dc != 0
                    if diagonal and topology == "four":
                        continue
                    rr, cc = r + dr, col + dc
                    if 0 <= rr < m and 0 <= cc < m:
                        D[u, rr * m + cc] = _edge_cost(c[r, col], c[rr, cc], spacing, diagonal, geo)
    for k in range(N):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def dirichlet_laplacian(n: int, dim: int = 2) -> np.ndarray:
    """Dense graph Laplacian of the ``n`` (or ``n x n``) interior lattice with zero boundary."""
    if dim == 1:
        L = np.zeros((n, n))
        for i in range(n):
            L[i, i] = 2.0
            if i > 0:
                L[i, i - 1] = -1.0
            if i < n - 1:
                L[i, i + 1] = -1.0
        return L
    if dim != 2:
        raise ValueError("dim must be 1 or 2")
    N = n * n
    L = np.zeros((N, N))
    for r in range(n):
        for c in range(n):
            u = r * n + c
            L[u, u] = 4.0
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < n and 0 <= cc < n:
                    L[u, rr * n + cc] = -1.0
    return L


def dense_green(n: int, dim: int = 2) -> np.ndarray:
    """Inverse of the Dirichlet Laplacian by direct dense solve, ``n <= 24``."""
    if n > MAX_GREEN_SIDE:
        raise ValueError(f"dense Green's function limited to n <= {MAX_GREEN_SIDE}")
    L = dirichlet_laplacian(n, dim)
    return np.linalg.solve(L, np.eye(L.shape[0]))


def exhaustive_box_count(points, scale: float, extent) -> int:
    """Occupied boxes found by checking every box of the tiling in turn.

    Same box convention as the fast counter: half-open boxes from the
    lower-left corner, the far edge of the extent belonging to the last box.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] > MAX_BOX_POINTS:
        raise ValueError(f"exhaustive box count limited to {MAX_BOX_POINTS} points")
    x0, y0, x1, y1 = extent
    nx = max(1, math.ceil((x1 - x0) / scale - 1e-9))
    ny = max(1, math.ceil((y1 - y0) / scale - 1e-9))
    xs, ys = pts[:, 0], pts[:, 1]
    count = 0
    for i in range(nx):
        lo = x0 + i * scale
        hi = x0 + (i + 1) * scale
        in_col = (xs >= lo) & ((xs < hi) | ((i == nx - 1) & (xs <= x1)))
        if not in_col.any():
            continue
        col_y = ys[in_col]
        for j in range(ny):
            blo = y0 + j * scale
            bhi = y0 + (j + 1) * scale
            if np.any((col_y >= blo) & ((col_y < bhi) | ((j == ny - 1) & (col_y <= y1)))):
                count += 1
    return count
