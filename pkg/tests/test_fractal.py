import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lqgball import fractal, gff, oracle
from lqgball.metric import build_weights, metric_ball, shortest_distances

EXT = (-0.5, -0.5, 0.5, 0.5)


def test_fit_dimension_exact_power_laws():
    e = fractal.fit_dimension([(1 / 2, 2), (1 / 4, 4), (1 / 8, 8)])
    assert e.slope == pytest.approx(1.0, abs=1e-12) and e.r_squared == pytest.approx(1.0, abs=1e-12)
    e = fractal.fit_dimension([(1 / 2, 4), (1 / 4, 16), (1 / 8, 64)])
    assert e.slope == pytest.approx(2.0, abs=1e-12)
    resid = e.log_counts - (e.intercept + e.slope * np.log(1 / e.scales))
    assert np.abs(resid).max() < 1e-12


def test_fit_dimension_sorts_and_reports_drops():
    e = fractal.fit_dimension([(1 / 8, 8), (1 / 2, 2), (1 / 16, 17), (1 / 4, 4)])
    assert np.all(np.diff(e.scales) < 0)
    assert math.isfinite(e.slope_drop_coarse) and math.isfinite(e.slope_drop_fine)
    s = e.summary()
    assert s["label"] == fractal.LABEL and s["window"] == [1 / 16, 1 / 2]


@pytest.mark.parametrize("pairs", [
    [(0.5, 1), (0.25, 2)],
    [(0.5, 1), (0.5, 2), (0.25, 3)],
    [(0.5, 0), (0.25, 2), (0.125, 3)],
])
def test_fit_dimension_errors(pairs):
    with pytest.raises(ValueError):
        fractal.fit_dimension(pairs)


def test_box_count_single_point():
    for s, c in fractal.box_count([[0.1, 0.2]], EXT, fractal.dyadic_scales(EXT, 1 / 256, 1)):
        assert c == 1


def test_box_count_full_square():
    n = 256
    c = -0.5 + (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(c, c)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    scales = fractal.dyadic_scales(EXT, 1 / 128, 1 / 2)
    counts = dict(fractal.box_count(pts, EXT, scales))
    for s in scales:
        assert counts[s] == round(1 / s) ** 2
    assert abs(fractal.box_dimension(pts, EXT, scales).slope - 2.0) < 1e-9


def test_box_count_line():
    pts = np.column_stack([np.linspace(-0.5, 0.5, 1024), np.full(1024, 0.0123)])
    est = fractal.box_dimension(pts, EXT, fractal.dyadic_scales(EXT, 1 / 256, 1 / 4))
    assert abs(est.slope - 1.0) < 0.02


def test_box_count_adjacent_boxes():
    assert oracle.exhaustive_box_count([[0.01, 0.01], [0.02, 0.02]], 0.25, EXT) == 1
    assert oracle.exhaustive_box_count([[0.01, 0.01], [-0.01, 0.01]], 0.25, EXT) == 2
    assert dict(fractal.box_count([[0.01, 0.01], [-0.01, 0.01]], EXT, [0.25]))[0.25] == 2


def test_box_count_errors():
    with pytest.raises(ValueError):
        fractal.box_count(np.empty((0, 2)), EXT, [0.25])
    with pytest.raises(ValueError):
        fractal.box_count([[0, 0]], EXT, [2.0])
    with pytest.raises(ValueError):
        fractal.box_count([[0, 0]], EXT, [0.001], min_scale=0.01)
    with pytest.raises(ValueError):
        fractal.box_count([[0.7, 0]], EXT, [0.25])


def test_offset_counts_average():
    pts = np.random.default_rng(0).uniform(-0.5, 0.5, (500, 2))
    plain = dict(fractal.box_count(pts, EXT, [0.125]))[0.125]
    off = dict(fractal.box_count(pts, EXT, [0.125], offsets=True))[0.125]
    assert 0.5 * plain < off < 2 * plain


point_sets = st.builds(
    lambda seed, k, lattice: (np.random.default_rng(seed).integers(0, 257, (k, 2)) / 256 - 0.5) if lattice
    else np.random.default_rng(seed).uniform(-0.5, 0.5, (k, 2)),
    st.integers(0, 2 ** 32 - 1), st.integers(1, 1000), st.booleans())


@given(point_sets)
def test_box_count_matches_oracle_and_is_monotone(pts):
    scales = fractal.dyadic_scales(EXT, 2.0 ** -8, 1.0)
    counts = dict(fractal.box_count(pts, EXT, scales))
    for s in scales:
        assert counts[s] == oracle.exhaustive_box_count(pts, s, EXT)
    seq = [counts[s] for s in scales]  # descending scales
    assert all(a <= b for a, b in zip(seq, seq[1:]))


def test_dyadic_scales():
    s = fractal.dyadic_scales(EXT, 1 / 64, 1 / 8)
    assert list(s) == [1 / 8, 1 / 16, 1 / 32, 1 / 64]


# ---- quantum covers -------------------------------------------------------------


@pytest.fixture(scope="module")
def zero_ball():
    f = gff.zero_field(256)
    w = build_weights(f, 0.5)
    d = shortest_distances(w, [f.origin_cell()])
    return f, w, metric_ball(d, 0.5)


def test_cover_singleton_and_large_radius(zero_ball):
    f, w, ball = zero_ball
    assert fractal.quantum_cover_count([(10, 10)], w, 0.01) == 1
    assert fractal.quantum_cover_count(ball.boundary, w, 2.0) == 1
    with pytest.raises(ValueError):
        fractal.quantum_cover_count(np.empty((0, 2), int), w, 0.1)
    with pytest.raises(ValueError):
        fractal.quantum_cover_count([(1, 1)], w, 0.0)


def test_cover_is_valid_and_count_plausible(zero_ball):
    f, w, ball = zero_ball
    b = ball.boundary
    xy = f.cell_xy(b)
    perim = 0.0
    # perimeter of the polygonal boundary via angular ordering around the origin
    order = np.argsort(np.arctan2(xy[:, 1], xy[:, 0]))
    ring = xy[order]
    perim = float(np.sum(np.hypot(*(np.roll(ring, -1, axis=0) - ring).T)))
    for r in (0.02, 0.05, 0.1):
        centres = fractal.quantum_cover(b, w, r)
        assert fractal.verify_cover(b, w, centres, r)
        k = centres.shape[0]
        assert perim / (2 * r) / 2 <= k <= 2 * perim / (2 * r)
    assert fractal.quantum_cover_count(b, w, 0.05, check=True) > 1


def test_zero_field_quantum_dimension(zero_ball):
    f, w, ball = zero_ball
    est = fractal.quantum_dimension(ball.boundary, w, [0.2, 0.1, 0.05, 0.025])
    assert abs(est.slope - 1.0) < 0.1
    assert np.all(np.diff(est.counts) >= 0)


def test_cover_count_nonincreasing_in_r(p83):
    f = gff.sample_field(128, 8)
    w = build_weights(f, p83)
    d = shortest_distances(w, [f.origin_cell()])
    b = metric_ball(d, float(np.quantile(d.dist, 0.2))).boundary
    radii = np.geomspace(0.01, 0.3, 6)
    est = fractal.quantum_dimension(b, w, radii, check=True)
    assert np.all(np.diff(est.counts) >= 0)  # counts listed for descending radii


def test_diameter_sum_profile_zero_crossing(zero_ball):
    f, w, ball = zero_ball
    ps = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    slopes = fractal.diameter_sum_profile(ball.boundary, w, (-1, -1, 1, 1), [1 / 4, 1 / 8, 1 / 16], ps)
    assert slopes[0] > 0 > slopes[-1]
    assert fractal.zero_crossing(ps, slopes) == pytest.approx(1.0, abs=0.2)
    assert math.isnan(fractal.zero_crossing([0, 1], [1, 2]))
