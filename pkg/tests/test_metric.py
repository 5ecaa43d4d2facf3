import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from lqgball import gff, metric, oracle
from lqgball.formulas import SQRT_8_3, make_params
from lqgball.gff import FieldGrid, RadialBump
from lqgball.metric import build_weights, internal_diameter, metric_ball, shortest_distances


def rand_field(rng, m, scale=1.0):
    return FieldGrid(m, 2.0 / m, scale * rng.standard_normal((m, m)), None)


small_fields = st.builds(
    lambda seed, m: rand_field(np.random.default_rng(seed), m, 1.5),
    st.integers(0, 2 ** 32 - 1), st.integers(2, 8))


# ---- weights ----------------------------------------------------------------


def test_zero_field_weights():
    w = build_weights(gff.zero_field(16), 0.4)
    assert np.all(w.cell_cost == 1.0)
    assert w.edge_cost((3, 3), (3, 4)) == w.spacing
    assert w.edge_cost((3, 3), (4, 4)) == pytest.approx(w.spacing * math.sqrt(2))
    with pytest.raises(ValueError):
        w.edge_cost((3, 3), (5, 3))


def test_constant_shift_scales_edges(rng):
    f0 = gff.zero_field(8)
    c, xi = 0.7, 0.4
    w0, w1 = build_weights(f0, xi), build_weights(f0.with_values(np.full((8, 8), c)), xi)
    assert w1.edge_cost((0, 0), (1, 1)) == pytest.approx(math.exp(xi * c) * w0.edge_cost((0, 0), (1, 1)), rel=1e-15)


def test_min_cost_matches_field_min(p83):
    f = gff.sample_field(64, 9)
    w = build_weights(f, p83)
    assert w.cell_cost.min() == math.exp(p83.xi * f.values.min())
    assert w.xi == p83.xi


def test_weight_validation():
    f = gff.zero_field(8)
    with pytest.raises(OverflowError):
        build_weights(f.with_values(np.full((8, 8), 1e4)), 1.0)
    with pytest.raises(ValueError):
        build_weights(f, 1.0, topology="six")
    with pytest.raises(ValueError):
        build_weights(f, 1.0, edge_rule="max")


def test_geo_edge_rule():
    f = FieldGrid(2, 1.0, np.array([[0.0, 1.0], [0.0, 0.0]]), None)
    w = build_weights(f, 1.0, edge_rule="geo")
    assert w.edge_cost((0, 0), (0, 1)) == pytest.approx(math.sqrt(math.e) * w.spacing)


# ---- shortest paths -----------------------------------------------------------


def test_zero_field_axis_distances():
    f = gff.zero_field(32)
    w = build_weights(f, 0.5)
    d = shortest_distances(w, [(16, 16)]).dist
    for k in range(1, 15):
        assert d[16, 16 + k] == pytest.approx(k * f.spacing, rel=1e-14)
        assert d[16 - k, 16] == pytest.approx(k * f.spacing, rel=1e-14)
    assert d[16, 16] == 0.0


@pytest.mark.parametrize("topology", ["eight", "four"])
@pytest.mark.parametrize("rule", ["arith", "geo"])
def test_dijkstra_matches_floyd_warshall(rng, topology, rule):
    for _ in range(10):
        m = int(rng.integers(2, 9))
        w = build_weights(rand_field(rng, m, 2.0), 0.6, topology=topology, edge_rule=rule)
        D = oracle.floyd_warshall(w)
        for src in range(m * m):
            d = shortest_distances(w, [divmod(src, m)]).dist.ravel()
            assert np.allclose(d, D[src], rtol=1e-12, atol=0)


def test_multi_source_is_min_of_single(rng):
    w = build_weights(rand_field(rng, 16), 0.5)
    a = shortest_distances(w, [(1, 1)]).dist
    b = shortest_distances(w, [(10, 12)]).dist
    assert np.array_equal(shortest_distances(w, [(1, 1), (10, 12)]).dist, np.minimum(a, b))


def test_source_validation(rng):
    w = build_weights(rand_field(rng, 8), 0.5)
    with pytest.raises(ValueError):
        shortest_distances(w, np.empty((0, 2), dtype=int))
    with pytest.raises(ValueError):
        shortest_distances(w, [(8, 0)])


def test_cutoff_marks_far_cells_unreached(rng):
    w = build_weights(rand_field(rng, 32), 0.5)
    full = shortest_distances(w, [(16, 16)]).dist
    cut = float(np.median(full))
    d = shortest_distances(w, [(16, 16)], cutoff=cut)
    inside = full <= cut
    assert np.array_equal(d.dist[inside], full[inside])
    assert np.all(np.isinf(d.dist[~inside]))
    assert not d.visited_all and shortest_distances(w, [(0, 0)]).visited_all


def test_predecessor_paths(rng):
    w = build_weights(rand_field(rng, 12), 0.5)
    d = shortest_distances(w, [(0, 0)], predecessors=True)
    path = d.path_to((11, 7))
    assert path[0] == (0, 0) and path[-1] == (11, 7)
    length = sum(w.edge_cost(u, v) for u, v in zip(path, path[1:]))
    assert length == pytest.approx(d.dist[11, 7], rel=1e-12)
    with pytest.raises(ValueError):
        shortest_distances(w, [(0, 0)]).path_to((1, 1))


@given(small_fields, st.floats(-3, 3), st.floats(0.1, 0.9))
def test_weyl_constant_shift_property(f, c, xi):
    src = [(0, 0)]
    d0 = shortest_distances(build_weights(f, xi), src, predecessors=True)
    d1 = shortest_distances(build_weights(f.with_values(f.values + c), xi), src, predecessors=True)
    mask = d0.dist > 0
    assert np.allclose(d1.dist[mask], math.exp(xi * c) * d0.dist[mask], rtol=1e-12, atol=0)


def test_weyl_preserves_geodesics(rng):
    # generic random fields have unique geodesics, so predecessor maps agree
    for _ in range(10):
        f = rand_field(rng, 8, 1.0)
        a = shortest_distances(build_weights(f, 0.5), [(0, 0)], predecessors=True)
        b = shortest_distances(build_weights(f.with_values(f.values + 1.3), 0.5), [(0, 0)], predecessors=True)
        assert np.array_equal(a.pred, b.pred)


@given(small_fields, st.floats(0.1, 0.9))
def test_triangle_inequality_along_edges(f, xi):
    w = build_weights(f, xi)
    d = shortest_distances(w, [(0, 0)]).dist
    m = f.n
    for r in range(m):
        for c in range(m):
            for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < m and 0 <= cc < m:
                    e = w.edge_cost((r, c), (rr, cc))
                    assert abs(d[r, c] - d[rr, cc]) <= e * (1 + 1e-12)


def test_triangle_inequality_sampled_pairs_large_grid(p83, rng):
    f = gff.sample_field(256, 4)
    w = build_weights(f, p83)
    d = shortest_distances(w, [f.origin_cell()]).dist
    idx = rng.integers(1, 255, size=(2000, 2))
    for (r, c) in idx:
        for dr, dc in ((0, 1), (1, 1)):
            assert abs(d[r, c] - d[r + dr, c + dc]) <= w.edge_cost((r, c), (r + dr, c + dc)) * (1 + 1e-12)


@given(small_fields, st.floats(0.1, 0.9), st.integers(0, 2 ** 32 - 1))
def test_monotone_in_field(f, xi, seed):
    bump = np.abs(np.random.default_rng(seed).standard_normal(f.shape))
    d0 = shortest_distances(build_weights(f, xi), [(0, 0)]).dist
    d1 = shortest_distances(build_weights(f.with_values(f.values + bump), xi), [(0, 0)]).dist
    assert np.all(d1 >= d0 * (1 - 1e-12))


def test_locality_outside_reached_set(rng):
    for _ in range(20):
        m = 16
        f = rand_field(rng, m)
        w = build_weights(f, 0.5)
        src = [(8, 8)]
        full = shortest_distances(w, src).dist
        target = tuple(rng.integers(0, m, 2))
        cut = float(full[target])
        d = shortest_distances(w, src, cutoff=cut)
        reached = d.reached
        # an edge's cost involves both end cells, so keep the one-cell collar too
        protected = ndimage.binary_dilation(reached, structure=np.ones((3, 3), bool))
        edited = f.values + np.where(protected, 0.0, 5.0 * rng.standard_normal((m, m)))
        d2 = shortest_distances(build_weights(f.with_values(edited), 0.5), src, cutoff=cut)
        assert np.array_equal(d2.dist[reached], d.dist[reached])
        assert np.array_equal(d2.reached, reached)


# ---- balls ----------------------------------------------------------------------


def test_tiny_and_huge_balls(rng):
    w = build_weights(rand_field(rng, 16), 0.5)
    d = shortest_distances(w, [(8, 8)])
    b = metric_ball(d, 1e-6 * w.spacing)
    assert b.mask.sum() == 1 and b.boundary.tolist() == [[8, 8]]
    assert not b.touches_frame
    big = metric_ball(d, float(d.dist.max()))
    assert big.mask.all() and big.touches_frame and big.boundary.shape[0] == 0
    with pytest.raises(ValueError):
        metric_ball(d, 0.0)
    with pytest.raises(ValueError):
        metric_ball(shortest_distances(w, [(8, 8)], cutoff=0.1), 0.2)


def test_boundary_subset_of_mask(rng):
    w = build_weights(rand_field(rng, 64), 0.5)
    b = metric_ball(shortest_distances(w, [(32, 32)]), 0.5)
    assert np.all(b.mask[b.boundary[:, 0], b.boundary[:, 1]])
    assert np.array_equal(b.boundary_mask, metric.ball_boundary_mask(b.mask))


def test_zero_field_ball_is_smooth_curve():
    from lqgball import fractal
    f = gff.zero_field(512)
    d = shortest_distances(build_weights(f, 0.5), [f.origin_cell()])
    b = metric_ball(d, 0.6)
    assert not b.touches_frame
    est = fractal.box_dimension(f.cell_xy(b.boundary), (-1, -1, 1, 1), [1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64])
    assert abs(est.slope - 1.0) < 0.1


# ---- internal diameters ----------------------------------------------------------


def test_internal_diameter_trivial_cases():
    f = gff.zero_field(16)
    w = build_weights(f, 0.5)
    assert internal_diameter(w, [(3, 3)]).value == 0.0
    strip = [(5, c) for c in range(2, 12)]
    est = internal_diameter(w, strip)
    assert est.value == pytest.approx(9 * f.spacing, rel=1e-14)
    long_strip = internal_diameter(w, [(5, c) for c in range(16)] + [(6, c) for c in range(16)] +
                                   [(7, c) for c in range(16)] + [(8, c) for c in range(16)] + [(9, 0)])
    assert long_strip.lower_bound
    with pytest.raises(ValueError):
        internal_diameter(w, [(0, 0), (5, 5)])
    with pytest.raises(ValueError):
        internal_diameter(w, np.empty((0, 2), int))


def _oracle_region_diameter(w, cells):
    r0, c0 = cells.min(axis=0)
    sub = np.full((8, 8), np.inf)
    for r, c in cells:
        sub[r - r0, c - c0] = w.cell_cost[r, c]
    D = oracle.floyd_warshall(sub, w.spacing, topology=w.topology, edge_rule=w.edge_rule)
    idx = [(r - r0) * 8 + (c - c0) for r, c in cells]
    return D[np.ix_(idx, idx)].max()


def test_internal_diameter_against_oracle(rng):
    for _ in range(100):
        w = build_weights(rand_field(rng, 16, 1.5), 0.6)
        # random connected region of <= 12 cells grown inside an 8x8 window
        cells = {(4, 4)}
        while len(cells) < int(rng.integers(2, 13)):
            r, c = list(cells)[int(rng.integers(len(cells)))]
            dr, dc = rng.integers(-1, 2, 2)
            nr, nc = r + dr, c + dc
            if 0 <= nr < 8 and 0 <= nc < 8:
                cells.add((int(nr), int(nc)))
        cells = np.array(sorted(cells))
        exact = _oracle_region_diameter(w, cells)
        est = internal_diameter(w, cells)
        assert est.value == pytest.approx(exact, rel=1e-12)
        assert not est.lower_bound


def test_two_sweep_is_a_lower_bound_on_larger_regions(rng, monkeypatch):
    monkeypatch.setattr(metric, "EXACT_DIAMETER_CELLS", 0)
    for _ in range(30):
        w = build_weights(rand_field(rng, 8, 1.5), 0.6)
        cells = np.argwhere(np.ones((8, 8), bool))
        exact = _oracle_region_diameter(w, cells)
        est = internal_diameter(w, cells)
        assert est.lower_bound
        assert 0.75 * exact <= est.value <= exact * (1 + 1e-12)


def test_euclidean_ball_cells():
    f = gff.zero_field(64)
    m = metric.euclidean_ball_cells(f, (0.0, 0.0), 0.25)
    assert m.sum() == pytest.approx(math.pi * (0.25 / f.spacing) ** 2, rel=0.05)


# ---- theta profile ---------------------------------------------------------------


def _theta_setup(n=64, scale=0.12):
    f = gff.sample_field(n, 21)
    bump = RadialBump((0.0, 0.0), scale)
    k1 = [f.origin_cell()]
    k2 = [(2, 2)]
    return f, bump, k1, k2


def test_theta_degenerate_bumps(p83):
    f, bump, k1, k2 = _theta_setup()
    xs = [0.0, 0.5, 1.0, 2.0]
    t0 = metric.theta_profile(f, p83, lambda X, Y: np.zeros_like(X), xs, k1, k2, check_separation=False)
    assert np.all(t0.thetas == t0.thetas[0]) and math.isnan(t0.annulus_gap)
    t1 = metric.theta_profile(f, p83, lambda X, Y: np.ones_like(X), xs, k1, k2, check_separation=False)
    assert np.allclose(t1.thetas, np.exp(p83.xi * np.array(xs)) * t1.thetas[0], rtol=1e-12)


def test_theta_perturbation_bound_small(p83):
    xs = np.linspace(0.0, 3.0, 7)
    for seed in range(5):
        f = gff.sample_field(64, 100 + seed)
        bump = RadialBump((0.0, 0.0), 0.12)
        prof = metric.theta_profile(f, p83, bump, xs, [f.origin_cell()], [(2, 2)])
        assert prof.annulus_gap > 0
        assert np.all(np.diff(prof.thetas) > 0)
        for i in range(xs.size):
            for j in range(i + 1, xs.size):
                x, y = xs[i], xs[j]
                bound = (1 - math.exp(-p83.xi * (y - x))) * math.exp(p83.xi * x) * prof.annulus_gap
                assert prof.thetas[j] - prof.thetas[i] >= bound * (1 - 1e-12)


def test_theta_separation_errors(p83):
    f, bump, k1, k2 = _theta_setup()
    with pytest.raises(ValueError):
        metric.theta_profile(f, p83, bump, [0.0], k2, k1)
    with pytest.raises(ValueError):
        metric.theta_profile(f, p83, lambda X, Y: X * 0, [0.0], k1, k2)
    with pytest.raises(ValueError):
        metric.theta_profile(f, p83, bump, [], k1, k2)


def test_annulus_sides_partition():
    f = gff.zero_field(64)
    bump = RadialBump((0.0, 0.0), 0.12)
    plateau, inner, outer, inside, outside = metric.annulus_sides(bump, f)
    assert not (plateau & inside).any() and not (plateau & outside).any()
    assert np.all(plateau[inner]) and np.all(plateau[outer])
    assert inner.any() and outer.any()
    assert make_params(SQRT_8_3).xi > 0
