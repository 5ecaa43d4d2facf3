"""Numba kernels for shortest paths on weighted square grids.

Cells are addressed by flat row-major index.  Edge cost between neighbours
``u, v`` is ``spacing * length * mean(cost[u], cost[v])`` where ``length`` is
1 for axis neighbours and sqrt(2) for diagonals, and ``mean`` is arithmetic
or geometric.

The workhorse ``run_dijkstra`` expects ``dist`` to be +inf on every cell it
may reach and reports the cells it wrote in ``touched``, so callers doing many
small searches can reset only those cells instead of the whole grid.
"""

import heapq
import math

import numpy as np
from numba import njit

INF = np.inf

# first four entries are the axis neighbours
DR = np.array([-1, 1, 0, 0, -1, -1, 1, 1], dtype=np.int64)
DC = np.array([0, 0, -1, 1, -1, 1, -1, 1], dtype=np.int64)
LEN = np.array([1.0, 1.0, 1.0, 1.0, math.sqrt(2.0), math.sqrt(2.0), math.sqrt(2.0), math.sqrt(2.0)])


@njit(cache=True)
def edge_weight(cu, cv, spacing, length, geo):
    if geo:
        return spacing * length * math.sqrt(cu * cv)
    return spacing * length * (0.5 * (cu + cv))


@njit(cache=True)
def run_dijkstra(cost, spacing, n_neigh, geo, sources, cutoff, allowed, use_allowed,
                 dist, pred, use_pred, touched):
    nr, nc = cost.shape
    flat = cost.ravel()
    heap = [(0.0, np.int64(0))]
    heap.pop()
    cnt = 0
    for s in sources:
        if dist[s] == INF:
            touched[cnt] = s
            cnt += 1
        dist[s] = 0.0
        if use_pred:
            pred[s] = -1
        heapq.heappush(heap, (0.0, np.int64(s)))
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if d > cutoff:
            break
        r = u // nc
        c = u - r * nc
        cu = flat[u]
        for k in range(n_neigh):
            rr = r + DR[k]
            cc = c + DC[k]
            if rr < 0 or rr >= nr or cc < 0 or cc >= nc:
                continue
            v = rr * nc + cc
            if use_allowed and not allowed[v]:
                continue
            nd = d + edge_weight(cu, flat[v], spacing, LEN[k], geo)
            if nd < dist[v]:
                if dist[v] == INF:
                    touched[cnt] = v
                    cnt += 1
                dist[v] = nd
                if use_pred:
                    pred[v] = u
                heapq.heappush(heap, (nd, v))
    if cutoff < INF:
        for t in range(cnt):
            v = touched[t]
            if dist[v] > cutoff:
                dist[v] = INF
                if use_pred:
                    pred[v] = -1
    return cnt


@njit(cache=True)
def greedy_cover(cost, spacing, n_neigh, geo, targets, r):
    """Greedy cover of ``targets`` (sorted flat indices) by metric balls of radius ``r``.

    Returns the flat indices of the chosen centres in selection order.
    """
    n_cells = cost.size
    dist = np.full(n_cells, INF)
    pred = np.empty(0, dtype=np.int64)
    allowed = np.empty(0, dtype=np.bool_)
    touched = np.empty(n_cells, dtype=np.int64)
    slot = np.full(n_cells, -1, dtype=np.int64)
    for k in range(targets.size):
        slot[targets[k]] = k
    covered = np.zeros(targets.size, dtype=np.bool_)
    centres = np.empty(targets.size, dtype=np.int64)
    n_centres = 0
    src = np.empty(1, dtype=np.int64)
    for k in range(targets.size):
        if covered[k]:
            continue
        centres[n_centres] = targets[k]
        n_centres += 1
        src[0] = targets[k]
        cnt = run_dijkstra(cost, spacing, n_neigh, geo, src, r, allowed, False,
                           dist, pred, False, touched)
        for t in range(cnt):
            v = touched[t]
            if dist[v] <= r and slot[v] >= 0:
                covered[slot[v]] = True
            dist[v] = INF
    return centres[:n_centres]
